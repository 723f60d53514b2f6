#include "poolopt/reward.hpp"

namespace poolopt {

namespace {

void check_context(const DualSchemeContext& ctx, bool needs_pps_fraction) {
    if (!(ctx.pool_hashrate > 0.0)) throw ZeroPoolHashrate("pool_hashrate must be > 0");
    if (ctx.miner_rate < 0.0)
        throw OutOfRangeField("dual-scheme context", "miner_rate", "must be >= 0");
    if (ctx.block_reward < 0.0)
        throw OutOfRangeField("dual-scheme context", "block_reward", "must be >= 0");
    if (ctx.pps_paid_since_last_block < 0.0)
        throw OutOfRangeField("dual-scheme context", "pps_paid_since_last_block", "must be >= 0");
    if (needs_pps_fraction && !(ctx.pps_fraction > 0.0 && ctx.pps_fraction <= 1.0))
        throw OutOfRangeField("dual-scheme context", "pps_fraction", "must be in (0,1]");
    // The miner must fit inside the PPLNS slice.
    if (ctx.miner_rate > ctx.pps_fraction * ctx.pool_hashrate * (1.0 + 1e-12))
        throw OutOfRangeField("dual-scheme context", "miner_rate",
                              "exceeds the pool's PPLNS slice (pps_fraction * pool_hashrate)");
}

}  // namespace

double strategy1_reward(const DualSchemeContext& ctx) {
    check_context(ctx, false);
    return ctx.block_reward * ctx.miner_rate / ctx.pool_hashrate;
}

double strategy2_reward(const DualSchemeContext& ctx) {
    check_context(ctx, false);
    return ctx.block_reward * ctx.miner_rate / ctx.pool_hashrate;
}

double strategy3_reward(const DualSchemeContext& ctx) {
    check_context(ctx, true);
    if (ctx.pps_paid_since_last_block > ctx.block_reward)
        throw BucketDeficit("PPS bucket owes more than the block reward pays");
    return (ctx.block_reward - ctx.pps_paid_since_last_block) * ctx.miner_rate /
           (ctx.pps_fraction * ctx.pool_hashrate);
}

}  // namespace poolopt
