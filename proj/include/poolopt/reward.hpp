#pragma once

#include "poolopt/errors.hpp"

namespace poolopt {

// Per-block payout inputs for a pool that runs PPS and PPLNS side by side.
// z = pps_fraction is the share of pool power on PPLNS contracts; the
// miner considered here sits inside that PPLNS slice (miner_rate <=
// pps_fraction * pool_hashrate).
struct DualSchemeContext {
    double block_reward = 0.0;             // R, USD
    double pps_fraction = 1.0;             // z
    double pool_hashrate = 0.0;            // h/s
    double miner_rate = 0.0;               // h/s
    double pps_paid_since_last_block = 0.0;  // USD, used by strategy 3 only
};

// Strategy 1: the manager splits R into a PPS part (1-z)R and a PPLNS
// part zR, then pays the PPLNS slice pro rata. Works out to R * l/L.
double strategy1_reward(const DualSchemeContext& ctx);

// Strategy 2: PPLNS miners are paid from the whole-pool hashrate and the
// remainder tops up the PPS bucket. Same paid amount as strategy 1.
double strategy2_reward(const DualSchemeContext& ctx);

// Strategy 3: the PPS bucket is replenished first with everything paid to
// PPS miners since the last block, and PPLNS gets what is left:
// (R - paid) * l / (z * L). A bucket owing more than the block pays is an
// error rather than a negative payout.
double strategy3_reward(const DualSchemeContext& ctx);

}  // namespace poolopt
