#include "poolopt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// The minimizer below follows M. J. D. Powell's COBYLA construction: a
// simplex of n+1 interpolation points carries linear models of the
// objective and of every constraint; each step solves a linear
// programming subproblem inside a trust region whose radius only ever
// shrinks, and a merit function f + parmu * maxviolation with an adaptive
// penalty decides acceptance. The control flow keeps Powell's original
// labeled structure; arrays are addressed through 1-based accessors so
// the loops can be compared line by line against the published algorithm.

namespace poolopt {

std::string to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Converged: return "converged";
        case SolverStatus::MaxEvals: return "max_evals";
        case SolverStatus::Stalled: return "stalled";
    }
    return "?";
}

namespace {

using CalcFn = std::function<void(const std::vector<double>&, double&, std::vector<double>&)>;

// Trust-region linear subproblem. Stage one finds the shortest dx
// minimizing the greatest violation of the linearized constraints
// a(:,k)'dx >= b(k) within |dx| <= rho; remaining freedom then improves
// the linearized objective a(:,m+1)'dx without increasing the worst
// violation. ifull reports whether the step reached the trust boundary.
void trstlp(int n, int m, const std::vector<double>& a_store, const std::vector<double>& b_store,
            double rho, std::vector<double>& dx_store, int& ifull) {
    std::vector<double> z_store(n * n), zdota_store(n), vmultc_store(m + 1), sdirn_store(n),
        dxnew_store(n), vmultd_store(m + 1);
    std::vector<int> iact_store(m + 1);

    auto A = [&](int i, int k) -> const double& { return a_store[(i - 1) + (k - 1) * n]; };
    auto B = [&](int k) -> const double& { return b_store[k - 1]; };
    auto DX = [&](int i) -> double& { return dx_store[i - 1]; };
    auto Z = [&](int i, int j) -> double& { return z_store[(i - 1) + (j - 1) * n]; };
    auto ZDOTA = [&](int k) -> double& { return zdota_store[k - 1]; };
    auto VMULTC = [&](int k) -> double& { return vmultc_store[k - 1]; };
    auto SDIRN = [&](int i) -> double& { return sdirn_store[i - 1]; };
    auto DXNEW = [&](int i) -> double& { return dxnew_store[i - 1]; };
    auto VMULTD = [&](int k) -> double& { return vmultd_store[k - 1]; };
    auto IACT = [&](int k) -> int& { return iact_store[k - 1]; };

    int mcon, nact, icon, i, j, k, nactx = 0, isave, kk, kw, kp, kl, icount;
    double resmax, optold, optnew, tot, temp, alpha, beta, sp, spabs, acca, accb, ratio, zdotv,
        zdvabs, vsave, dd, ss, sd, stpful, step, zdotw, zdwabs, resold = 0.0, sumabs, sum, tempa;

    ifull = 1;
    mcon = m;
    nact = 0;
    resmax = 0.0;
    icon = 0;
    for (i = 1; i <= n; ++i) {
        for (j = 1; j <= n; ++j) Z(i, j) = 0.0;
        Z(i, i) = 1.0;
        DX(i) = 0.0;
    }
    if (m >= 1) {
        for (k = 1; k <= m; ++k) {
            if (B(k) > resmax) {
                resmax = B(k);
                icon = k;
            }
        }
        for (k = 1; k <= m; ++k) {
            IACT(k) = k;
            VMULTC(k) = resmax - B(k);
        }
    }
    if (resmax == 0.0) goto line_480;
    for (i = 1; i <= n; ++i) SDIRN(i) = 0.0;

    // End the current stage when 3 consecutive iterations neither reduce
    // the best objective value nor grow the active set; prevents cycling.
line_60:
    optold = 0.0;
    icount = 0;
line_70:
    if (mcon == m) {
        optnew = resmax;
    } else {
        optnew = 0.0;
        for (i = 1; i <= n; ++i) optnew -= DX(i) * A(i, mcon);
    }
    if (icount == 0 || optnew < optold) {
        optold = optnew;
        nactx = nact;
        icount = 3;
    } else if (nact > nactx) {
        nactx = nact;
        icount = 3;
    } else {
        --icount;
        if (icount == 0) goto line_490;
    }

    // Add constraint IACT(ICON) to the active set: Givens rotations make
    // the trailing columns of Z orthogonal to its gradient, with scalar
    // products attributable to rounding zeroed out.
    if (icon <= nact) goto line_260;
    kk = IACT(icon);
    for (i = 1; i <= n; ++i) DXNEW(i) = A(i, kk);
    tot = 0.0;
    k = n;
line_100:
    if (k > nact) {
        sp = 0.0;
        spabs = 0.0;
        for (i = 1; i <= n; ++i) {
            temp = Z(i, k) * DXNEW(i);
            sp += temp;
            spabs += std::abs(temp);
        }
        acca = spabs + 0.1 * std::abs(sp);
        accb = spabs + 0.2 * std::abs(sp);
        if (spabs >= acca || acca >= accb) sp = 0.0;
        if (tot == 0.0) {
            tot = sp;
        } else {
            kp = k + 1;
            temp = std::sqrt(sp * sp + tot * tot);
            alpha = sp / temp;
            beta = tot / temp;
            tot = temp;
            for (i = 1; i <= n; ++i) {
                temp = alpha * Z(i, k) + beta * Z(i, kp);
                Z(i, kp) = alpha * Z(i, kp) - beta * Z(i, k);
                Z(i, k) = temp;
            }
        }
        --k;
        goto line_100;
    }

    if (tot != 0.0) {
        ++nact;
        ZDOTA(nact) = tot;
        VMULTC(icon) = VMULTC(nact);
        VMULTC(nact) = 0.0;
        goto line_210;
    }

    // The new gradient is a linear combination of the active ones; find a
    // constraint to delete, expressing the combination in VMULTD. An empty
    // active set here means the new gradient is numerically zero: no
    // progress is possible in this stage.
    ratio = -1.0;
    k = nact;
    if (k <= 0) goto line_490;
line_130:
    zdotv = 0.0;
    zdvabs = 0.0;
    for (i = 1; i <= n; ++i) {
        temp = Z(i, k) * DXNEW(i);
        zdotv += temp;
        zdvabs += std::abs(temp);
    }
    acca = zdvabs + 0.1 * std::abs(zdotv);
    accb = zdvabs + 0.2 * std::abs(zdotv);
    if (zdvabs < acca && acca < accb) {
        temp = zdotv / ZDOTA(k);
        if (temp > 0.0 && IACT(k) <= m) {
            tempa = VMULTC(k) / temp;
            if (ratio < 0.0 || tempa < ratio) ratio = tempa;
        }
        if (k >= 2) {
            kw = IACT(k);
            for (i = 1; i <= n; ++i) DXNEW(i) -= temp * A(i, kw);
        }
        VMULTD(k) = temp;
    } else {
        VMULTD(k) = 0.0;
    }
    --k;
    if (k > 0) goto line_130;
    if (ratio < 0.0) goto line_490;

    // Revise the multipliers and reorder the active set so the deleted
    // constraint sits last.
    for (k = 1; k <= nact; ++k) VMULTC(k) = std::max(0.0, VMULTC(k) - ratio * VMULTD(k));
    if (icon < nact) {
        isave = IACT(icon);
        vsave = VMULTC(icon);
        k = icon;
    line_170:
        kp = k + 1;
        kw = IACT(kp);
        sp = 0.0;
        for (i = 1; i <= n; ++i) sp += Z(i, k) * A(i, kw);
        temp = std::sqrt(sp * sp + ZDOTA(kp) * ZDOTA(kp));
        alpha = ZDOTA(kp) / temp;
        beta = sp / temp;
        ZDOTA(kp) = alpha * ZDOTA(k);
        ZDOTA(k) = temp;
        for (i = 1; i <= n; ++i) {
            temp = alpha * Z(i, kp) + beta * Z(i, k);
            Z(i, kp) = alpha * Z(i, k) - beta * Z(i, kp);
            Z(i, k) = temp;
        }
        IACT(k) = kw;
        VMULTC(k) = VMULTC(kp);
        k = kp;
        if (k < nact) goto line_170;
        IACT(k) = isave;
        VMULTC(k) = vsave;
    }
    temp = 0.0;
    for (i = 1; i <= n; ++i) temp += Z(i, nact) * A(i, kk);
    if (temp == 0.0) goto line_490;
    ZDOTA(nact) = temp;
    VMULTC(icon) = 0.0;
    VMULTC(nact) = ratio;

    // Keep the objective as the last active constraint during stage two.
line_210:
    IACT(icon) = IACT(nact);
    IACT(nact) = kk;
    if (mcon > m && kk != mcon) {
        k = nact - 1;
        sp = 0.0;
        for (i = 1; i <= n; ++i) sp += Z(i, k) * A(i, kk);
        temp = std::sqrt(sp * sp + ZDOTA(nact) * ZDOTA(nact));
        alpha = ZDOTA(nact) / temp;
        beta = sp / temp;
        ZDOTA(nact) = alpha * ZDOTA(k);
        ZDOTA(k) = temp;
        for (i = 1; i <= n; ++i) {
            temp = alpha * Z(i, nact) + beta * Z(i, k);
            Z(i, nact) = alpha * Z(i, k) - beta * Z(i, nact);
            Z(i, k) = temp;
        }
        IACT(nact) = IACT(k);
        IACT(k) = kk;
        temp = VMULTC(k);
        VMULTC(k) = VMULTC(nact);
        VMULTC(nact) = temp;
    }

    if (mcon > m) goto line_320;
    kk = IACT(nact);
    temp = 0.0;
    for (i = 1; i <= n; ++i) temp += SDIRN(i) * A(i, kk);
    temp -= 1.0;
    temp /= ZDOTA(nact);
    for (i = 1; i <= n; ++i) SDIRN(i) -= temp * Z(i, nact);
    goto line_340;

    // Delete constraint IACT(ICON) from the active set.
line_260:
    if (icon < nact) {
        isave = IACT(icon);
        vsave = VMULTC(icon);
        k = icon;
    line_270:
        kp = k + 1;
        kk = IACT(kp);
        sp = 0.0;
        for (i = 1; i <= n; ++i) sp += Z(i, k) * A(i, kk);
        temp = std::sqrt(sp * sp + ZDOTA(kp) * ZDOTA(kp));
        alpha = ZDOTA(kp) / temp;
        beta = sp / temp;
        ZDOTA(kp) = alpha * ZDOTA(k);
        ZDOTA(k) = temp;
        for (i = 1; i <= n; ++i) {
            temp = alpha * Z(i, kp) + beta * Z(i, k);
            Z(i, kp) = alpha * Z(i, k) - beta * Z(i, kp);
            Z(i, k) = temp;
        }
        IACT(k) = kk;
        VMULTC(k) = VMULTC(kp);
        k = kp;
        if (k < nact) goto line_270;
        IACT(k) = isave;
        VMULTC(k) = vsave;
    }
    --nact;

    if (mcon > m) goto line_320;
    temp = 0.0;
    for (i = 1; i <= n; ++i) temp += SDIRN(i) * Z(i, nact + 1);
    for (i = 1; i <= n; ++i) SDIRN(i) -= temp * Z(i, nact + 1);
    goto line_340;

line_320:
    temp = 1.0 / ZDOTA(nact);
    for (i = 1; i <= n; ++i) SDIRN(i) = temp * Z(i, nact);

    // Step to the trust-region boundary, or the step that zeroes RESMAX.
line_340:
    dd = rho * rho;
    sd = 0.0;
    ss = 0.0;
    for (i = 1; i <= n; ++i) {
        if (std::abs(DX(i)) >= 1.0e-6 * rho) dd -= DX(i) * DX(i);
        sd += DX(i) * SDIRN(i);
        ss += SDIRN(i) * SDIRN(i);
    }
    if (dd <= 0.0) goto line_490;
    temp = std::sqrt(ss * dd);
    if (std::abs(sd) >= 1.0e-6 * temp) temp = std::sqrt(ss * dd + sd * sd);
    stpful = dd / (temp + sd);
    step = stpful;
    if (mcon == m) {
        acca = step + 0.1 * resmax;
        accb = step + 0.2 * resmax;
        if (step >= acca || acca >= accb) goto line_480;
        step = std::min(step, resmax);
    }

    for (i = 1; i <= n; ++i) DXNEW(i) = DX(i) + step * SDIRN(i);
    if (mcon == m) {
        resold = resmax;
        resmax = 0.0;
        for (k = 1; k <= nact; ++k) {
            kk = IACT(k);
            temp = B(kk);
            for (i = 1; i <= n; ++i) temp -= A(i, kk) * DXNEW(i);
            resmax = std::max(resmax, temp);
        }
    }

    // The multipliers that DXNEW would have, rounding-level values forced
    // to zero. Nothing to do when the active set emptied out.
    k = nact;
    if (k <= 0) goto line_405;
line_390:
    zdotw = 0.0;
    zdwabs = 0.0;
    for (i = 1; i <= n; ++i) {
        temp = Z(i, k) * DXNEW(i);
        zdotw += temp;
        zdwabs += std::abs(temp);
    }
    acca = zdwabs + 0.1 * std::abs(zdotw);
    accb = zdwabs + 0.2 * std::abs(zdotw);
    if (zdwabs >= acca || acca >= accb) zdotw = 0.0;
    VMULTD(k) = zdotw / ZDOTA(k);
    if (k >= 2) {
        kk = IACT(k);
        for (i = 1; i <= n; ++i) DXNEW(i) -= VMULTD(k) * A(i, kk);
        --k;
        goto line_390;
    }
    if (mcon > m) VMULTD(nact) = std::max(0.0, VMULTD(nact));

line_405:
    for (i = 1; i <= n; ++i) DXNEW(i) = DX(i) + step * SDIRN(i);
    if (mcon > nact) {
        kl = nact + 1;
        for (k = kl; k <= mcon; ++k) {
            kk = IACT(k);
            sum = resmax - B(kk);
            sumabs = resmax + std::abs(B(kk));
            for (i = 1; i <= n; ++i) {
                temp = A(i, kk) * DXNEW(i);
                sum += temp;
                sumabs += std::abs(temp);
            }
            acca = sumabs + 0.1 * std::abs(sum);
            accb = sumabs + 0.2 * std::abs(sum);
            if (sumabs >= acca || acca >= accb) sum = 0.0;
            VMULTD(k) = sum;
        }
    }

    ratio = 1.0;
    icon = 0;
    for (k = 1; k <= mcon; ++k) {
        if (VMULTD(k) < 0.0) {
            temp = VMULTC(k) / (VMULTC(k) - VMULTD(k));
            if (temp < ratio) {
                ratio = temp;
                icon = k;
            }
        }
    }

    temp = 1.0 - ratio;
    for (i = 1; i <= n; ++i) DX(i) = temp * DX(i) + ratio * DXNEW(i);
    for (k = 1; k <= mcon; ++k) VMULTC(k) = std::max(0.0, temp * VMULTC(k) + ratio * VMULTD(k));
    if (mcon == m) resmax = resold + ratio * (resmax - resold);

    if (icon > 0) goto line_70;
    if (step == stpful) return;
line_480:
    mcon = m + 1;
    icon = mcon;
    IACT(mcon) = mcon;
    VMULTC(mcon) = 0.0;
    goto line_60;

line_490:
    if (mcon == m) goto line_480;
    ifull = 0;
}

struct CobylaOutcome {
    SolverStatus status = SolverStatus::Converged;
    int evals = 0;
    int radius_reductions = 0;
    // Best point seen, ordered by (violation within tolerance, objective).
    std::vector<double> best_x;
    double best_f = std::numeric_limits<double>::infinity();
    double best_maxcv = std::numeric_limits<double>::infinity();
};

// Main loop: maintains the simplex (best vertex in pole position), its
// inverse, and the table of function values; alternates model steps from
// trstlp with acceptability fixes of the simplex geometry, halving the
// radius when neither helps.
CobylaOutcome cobylb(int n, int m, std::vector<double>& x_store, double rhobeg, double rhoend,
                     int maxfun, const CalcFn& calcfc,
                     const std::function<void(double)>& rho_observer) {
    const int np = n + 1;
    const int mp = m + 1;
    const int mpp = m + 2;
    const double alpha = 0.25;
    const double beta = 2.1;
    const double gamma = 0.5;
    const double delta = 1.1;

    std::vector<double> con_store(mpp), sim_store(n * np), simi_store(n * n),
        datmat_store(mpp * np), a_store(n * mp), vsig_store(n), veta_store(n), sigbar_store(n),
        dx_store(n), w_store(n);

    auto X = [&](int i) -> double& { return x_store[i - 1]; };
    auto CON = [&](int k) -> double& { return con_store[k - 1]; };
    auto SIM = [&](int i, int j) -> double& { return sim_store[(i - 1) + (j - 1) * n]; };
    auto SIMI = [&](int i, int j) -> double& { return simi_store[(i - 1) + (j - 1) * n]; };
    auto DATMAT = [&](int k, int j) -> double& { return datmat_store[(k - 1) + (j - 1) * mpp]; };
    auto A = [&](int i, int k) -> double& { return a_store[(i - 1) + (k - 1) * n]; };
    auto VSIG = [&](int j) -> double& { return vsig_store[j - 1]; };
    auto VETA = [&](int j) -> double& { return veta_store[j - 1]; };
    auto SIGBAR = [&](int j) -> double& { return sigbar_store[j - 1]; };
    auto DX = [&](int i) -> double& { return dx_store[i - 1]; };
    auto W = [&](int j) -> double& { return w_store[j - 1]; };

    CobylaOutcome out;
    out.best_x.assign(x_store.begin(), x_store.end());

    int i, j, k, jdrop, nbest, l, iflag = 0, ifull = 0, ibrnch = 0, nfvals = 0;
    double rho = rhobeg, parmu = 0.0, f = 0.0, resmax, temp, tempa, error, parsig = 0.0, pareta,
        wsig, weta, cvmaxp, cvmaxm, sum = 0.0, dxsign, resnew, barmu, phi, phimin, prerec = 0.0,
        prerem = 0.0, vmold, vmnew, trured, ratio, edgmax, denom, cmin = 0.0, cmax = 0.0;

    temp = 1.0 / rho;
    for (i = 1; i <= n; ++i) {
        SIM(i, np) = X(i);
        for (j = 1; j <= n; ++j) SIMI(i, j) = 0.0;
        SIM(i, i) = rho;
        SIMI(i, i) = temp;
    }
    jdrop = np;
    ibrnch = 0;

line_40:
    if (nfvals >= maxfun && nfvals > 0) {
        out.status = SolverStatus::MaxEvals;
        goto line_600;
    }
    ++nfvals;
    {
        double fval;
        calcfc(x_store, fval, con_store);
        f = fval;
        if (!std::isfinite(f))
            throw NonFiniteObjective("objective returned a non-finite value");
        for (k = 1; k <= m; ++k)
            if (!std::isfinite(CON(k)))
                throw NonFiniteObjective("constraint " + std::to_string(k) +
                                         " returned a non-finite value");
    }
    resmax = 0.0;
    for (k = 1; k <= m; ++k) resmax = std::max(resmax, -CON(k));
    // Track the best point ever evaluated: strictly feasible points ranked
    // by objective, infeasible ones by violation. The strict gate keeps
    // hairline constraint violations from outbidding honest points.
    {
        const bool cur_ok = resmax == 0.0;
        const bool best_ok = out.best_maxcv <= 0.0;
        bool better;
        if (cur_ok && best_ok) better = f < out.best_f;
        else if (cur_ok != best_ok) better = cur_ok;
        else better = resmax < out.best_maxcv;
        if (better) {
            out.best_x.assign(x_store.begin(), x_store.end());
            out.best_f = f;
            out.best_maxcv = resmax;
        }
    }
    CON(mp) = f;
    CON(mpp) = resmax;
    if (ibrnch == 1) goto line_440;

    for (k = 1; k <= mpp; ++k) DATMAT(k, jdrop) = CON(k);
    if (nfvals > np) goto line_130;

    // Build the initial simplex, keeping the best vertex in pole position.
    if (jdrop <= n) {
        if (DATMAT(mp, np) <= f) {
            X(jdrop) = SIM(jdrop, np);
        } else {
            SIM(jdrop, np) = X(jdrop);
            for (k = 1; k <= mpp; ++k) {
                DATMAT(k, jdrop) = DATMAT(k, np);
                DATMAT(k, np) = CON(k);
            }
            for (k = 1; k <= jdrop; ++k) {
                SIM(jdrop, k) = -rho;
                temp = 0.0;
                for (i = k; i <= jdrop; ++i) temp -= SIMI(i, k);
                SIMI(jdrop, k) = temp;
            }
        }
    }
    if (nfvals <= n) {
        jdrop = nfvals;
        X(jdrop) += rho;
        goto line_40;
    }
line_130:
    ibrnch = 1;

    // Identify the optimal vertex of the current simplex.
line_140:
    phimin = DATMAT(mp, np) + parmu * DATMAT(mpp, np);
    nbest = np;
    for (j = 1; j <= n; ++j) {
        temp = DATMAT(mp, j) + parmu * DATMAT(mpp, j);
        if (temp < phimin) {
            nbest = j;
            phimin = temp;
        } else if (temp == phimin && parmu == 0.0) {
            if (DATMAT(mpp, j) < DATMAT(mpp, nbest)) nbest = j;
        }
    }

    if (nbest <= n) {
        for (i = 1; i <= mpp; ++i) {
            temp = DATMAT(i, np);
            DATMAT(i, np) = DATMAT(i, nbest);
            DATMAT(i, nbest) = temp;
        }
        for (i = 1; i <= n; ++i) {
            temp = SIM(i, nbest);
            SIM(i, nbest) = 0.0;
            SIM(i, np) += temp;
            tempa = 0.0;
            for (k = 1; k <= n; ++k) {
                SIM(i, k) -= temp;
                tempa -= SIMI(k, i);
            }
            SIMI(nbest, i) = tempa;
        }
    }

    // Bail out if SIMI has drifted too far from the true inverse.
    error = 0.0;
    for (i = 1; i <= n; ++i) {
        for (j = 1; j <= n; ++j) {
            temp = (i == j) ? -1.0 : 0.0;
            for (k = 1; k <= n; ++k) temp += SIMI(i, k) * SIM(k, j);
            error = std::max(error, std::abs(temp));
        }
    }
    if (error > 0.1) {
        out.status = SolverStatus::Stalled;
        goto line_600;
    }

    // Linear models: constraint gradients, then minus the objective
    // gradient in the last column of A.
    for (k = 1; k <= mp; ++k) {
        CON(k) = -DATMAT(k, np);
        for (j = 1; j <= n; ++j) W(j) = DATMAT(k, j) + CON(k);
        for (i = 1; i <= n; ++i) {
            temp = 0.0;
            for (j = 1; j <= n; ++j) temp += W(j) * SIMI(j, i);
            A(i, k) = (k == mp) ? -temp : temp;
        }
    }

    // Simplex acceptability: edge lengths within [alpha*rho, beta*rho].
    iflag = 1;
    parsig = alpha * rho;
    pareta = beta * rho;
    for (j = 1; j <= n; ++j) {
        wsig = 0.0;
        weta = 0.0;
        for (i = 1; i <= n; ++i) {
            wsig += SIMI(j, i) * SIMI(j, i);
            weta += SIM(i, j) * SIM(i, j);
        }
        VSIG(j) = 1.0 / std::sqrt(wsig);
        VETA(j) = std::sqrt(weta);
        if (VSIG(j) < parsig || VETA(j) > pareta) iflag = 0;
    }

    // If the geometry needs fixing, pick the vertex to replace.
    if (ibrnch == 1 || iflag == 1) goto line_370;
    jdrop = 0;
    temp = pareta;
    for (j = 1; j <= n; ++j) {
        if (VETA(j) > temp) {
            jdrop = j;
            temp = VETA(j);
        }
    }
    if (jdrop == 0) {
        for (j = 1; j <= n; ++j) {
            if (VSIG(j) < temp) {
                jdrop = j;
                temp = VSIG(j);
            }
        }
    }

    temp = gamma * rho * VSIG(jdrop);
    for (i = 1; i <= n; ++i) DX(i) = temp * SIMI(jdrop, i);
    cvmaxp = 0.0;
    cvmaxm = 0.0;
    sum = 0.0;
    for (k = 1; k <= mp; ++k) {
        sum = 0.0;
        for (i = 1; i <= n; ++i) sum += A(i, k) * DX(i);
        if (k < mp) {
            temp = DATMAT(k, np);
            cvmaxp = std::max(cvmaxp, -sum - temp);
            cvmaxm = std::max(cvmaxm, sum - temp);
        }
    }
    dxsign = 1.0;
    if (parmu * (cvmaxp - cvmaxm) > sum + sum) dxsign = -1.0;

    temp = 0.0;
    for (i = 1; i <= n; ++i) {
        DX(i) = dxsign * DX(i);
        SIM(i, jdrop) = DX(i);
        temp += SIMI(jdrop, i) * DX(i);
    }
    for (i = 1; i <= n; ++i) SIMI(jdrop, i) /= temp;
    for (j = 1; j <= n; ++j) {
        if (j != jdrop) {
            temp = 0.0;
            for (i = 1; i <= n; ++i) temp += SIMI(j, i) * DX(i);
            for (i = 1; i <= n; ++i) SIMI(j, i) -= temp * SIMI(jdrop, i);
        }
        X(j) = SIM(j, np) + DX(j);
    }
    goto line_40;

    // Model step inside the trust region.
line_370:
    trstlp(n, m, a_store, con_store, rho, dx_store, ifull);
    if (ifull == 0) {
        temp = 0.0;
        for (i = 1; i <= n; ++i) temp += DX(i) * DX(i);
        if (temp < 0.25 * rho * rho) {
            ibrnch = 1;
            goto line_550;
        }
    }

    // Predicted improvements; raise the penalty if needed (possibly
    // changing the optimal vertex).
    resnew = 0.0;
    CON(mp) = 0.0;
    for (k = 1; k <= mp; ++k) {
        sum = CON(k);
        for (i = 1; i <= n; ++i) sum -= A(i, k) * DX(i);
        if (k < mp) resnew = std::max(resnew, sum);
    }
    barmu = 0.0;
    prerec = DATMAT(mpp, np) - resnew;
    if (prerec > 0.0) barmu = sum / prerec;
    if (parmu < 1.5 * barmu) {
        parmu = 2.0 * barmu;
        phi = DATMAT(mp, np) + parmu * DATMAT(mpp, np);
        for (j = 1; j <= n; ++j) {
            temp = DATMAT(mp, j) + parmu * DATMAT(mpp, j);
            if (temp < phi) goto line_140;
            if (temp == phi && parmu == 0.0) {
                if (DATMAT(mpp, j) < DATMAT(mpp, np)) goto line_140;
            }
        }
    }
    prerem = parmu * prerec - sum;

    for (i = 1; i <= n; ++i) X(i) = SIM(i, np) + DX(i);
    ibrnch = 1;
    goto line_40;

line_440:
    vmold = DATMAT(mp, np) + parmu * DATMAT(mpp, np);
    vmnew = f + parmu * resmax;
    trured = vmold - vmnew;
    if (parmu == 0.0 && f == DATMAT(mp, np)) {
        prerem = prerec;
        trured = DATMAT(mpp, np) - resmax;
    }

    // Choose the vertex the trial point replaces; mandatory when the
    // merit function actually improved.
    ratio = (trured <= 0.0) ? 1.0 : 0.0;
    jdrop = 0;
    for (j = 1; j <= n; ++j) {
        temp = 0.0;
        for (i = 1; i <= n; ++i) temp += SIMI(j, i) * DX(i);
        temp = std::abs(temp);
        if (temp > ratio) {
            jdrop = j;
            ratio = temp;
        }
        SIGBAR(j) = temp * VSIG(j);
    }
    edgmax = delta * rho;
    l = 0;
    for (j = 1; j <= n; ++j) {
        if (SIGBAR(j) >= parsig || SIGBAR(j) >= VSIG(j)) {
            temp = VETA(j);
            if (trured > 0.0) {
                temp = 0.0;
                for (i = 1; i <= n; ++i) {
                    const double d = DX(i) - SIM(i, j);
                    temp += d * d;
                }
                temp = std::sqrt(temp);
            }
            if (temp > edgmax) {
                l = j;
                edgmax = temp;
            }
        }
    }
    if (l > 0) jdrop = l;
    if (jdrop == 0) goto line_550;

    temp = 0.0;
    for (i = 1; i <= n; ++i) {
        SIM(i, jdrop) = DX(i);
        temp += SIMI(jdrop, i) * DX(i);
    }
    for (i = 1; i <= n; ++i) SIMI(jdrop, i) /= temp;
    for (j = 1; j <= n; ++j) {
        if (j != jdrop) {
            temp = 0.0;
            for (i = 1; i <= n; ++i) temp += SIMI(j, i) * DX(i);
            for (i = 1; i <= n; ++i) SIMI(j, i) -= temp * SIMI(jdrop, i);
        }
    }
    for (k = 1; k <= mpp; ++k) DATMAT(k, jdrop) = CON(k);

    if (trured > 0.0 && trured >= 0.1 * prerem) goto line_140;
line_550:
    if (iflag == 0) {
        ibrnch = 0;
        goto line_140;
    }

    // Reduce rho (never grown) and rescale the penalty downward.
    if (rho > rhoend) {
        rho = 0.5 * rho;
        if (rho <= 1.5 * rhoend) rho = rhoend;
        ++out.radius_reductions;
        if (rho_observer) rho_observer(rho);
        if (parmu > 0.0) {
            denom = 0.0;
            for (k = 1; k <= mp; ++k) {
                cmin = DATMAT(k, np);
                cmax = cmin;
                for (i = 1; i <= n; ++i) {
                    cmin = std::min(cmin, DATMAT(k, i));
                    cmax = std::max(cmax, DATMAT(k, i));
                }
                if (k <= m && cmin < 0.5 * cmax) {
                    temp = std::max(cmax, 0.0) - cmin;
                    denom = (denom <= 0.0) ? temp : std::min(denom, temp);
                }
            }
            if (denom == 0.0) {
                parmu = 0.0;
            } else if (cmax - cmin < parmu * denom) {
                parmu = (cmax - cmin) / denom;
            }
        }
        goto line_140;
    }

    // Normal return.
    if (ifull == 1) goto line_620;
line_600:
    for (i = 1; i <= n; ++i) X(i) = SIM(i, np);
    f = DATMAT(mp, np);
    resmax = DATMAT(mpp, np);
line_620:
    out.evals = nfvals;
    // Prefer the tracked best over the final iterate under the same
    // ordering, so the caller always gets the best point found.
    {
        const bool fin_ok = resmax == 0.0;
        const bool best_ok = out.best_maxcv <= 0.0;
        bool final_better;
        if (fin_ok && best_ok) final_better = f < out.best_f;
        else if (fin_ok != best_ok) final_better = fin_ok;
        else final_better = resmax < out.best_maxcv;
        if (final_better) {
            out.best_x.assign(x_store.begin(), x_store.end());
            out.best_f = f;
            out.best_maxcv = resmax;
        }
    }
    return out;
}

SolverResult run_single(const ObjectiveFn& objective, const ConstraintFn& constraints,
                        int n_constraints, int n, const SolverConfig& config,
                        std::vector<double> x0) {
    CalcFn calcfc = [&](const std::vector<double>& x, double& f, std::vector<double>& con) {
        std::span<const double> xs(x.data(), static_cast<std::size_t>(n));
        f = -objective(xs);
        constraints(xs, std::span<double>(con.data(), static_cast<std::size_t>(n_constraints)));
    };

    std::vector<double> x = std::move(x0);
    CobylaOutcome out = cobylb(n, n_constraints, x, config.rho_begin, config.rho_end,
                               config.max_evals, calcfc, config.rho_observer);

    SolverResult result;
    result.x = out.best_x;
    result.objective = -out.best_f;
    result.evals = out.evals;
    result.status = out.status;
    result.radius_reductions = out.radius_reductions;

    std::vector<double> res(n_constraints);
    constraints(std::span<const double>(result.x.data(), result.x.size()),
                std::span<double>(res.data(), res.size()));
    result.feasible = true;
    for (double r : res)
        if (r < -config.rho_end) result.feasible = false;
    return result;
}

}  // namespace

SolverResult maximize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                      int n_constraints, int n, const SolverConfig& config) {
    if (n < 1) throw DimensionMismatch("dimension must be >= 1");
    if (n_constraints < 0) throw DimensionMismatch("constraint count must be >= 0");
    if (!(config.rho_end > 0.0) || config.rho_end > config.rho_begin)
        throw Error("solver config requires 0 < rho_end <= rho_begin");
    if (config.max_evals < n + 2)
        throw Error("max_evals must be at least n+2 = " + std::to_string(n + 2));

    switch (config.start) {
        case SolverStart::VertexSweep:
            return vertex_sweep_maximize(objective, constraints, n_constraints, n, config);
        case SolverStart::EqualSplit: {
            std::vector<double> x0(n, 1.0 / (n + 1));
            return run_single(objective, constraints, n_constraints, n, config, std::move(x0));
        }
        case SolverStart::User: {
            if (static_cast<int>(config.user_start.size()) != n)
                throw DimensionMismatch("user start has size " +
                                        std::to_string(config.user_start.size()) + ", expected " +
                                        std::to_string(n));
            return run_single(objective, constraints, n_constraints, n, config,
                              config.user_start);
        }
    }
    throw Error("unhandled solver start");
}

SolverResult vertex_sweep_maximize(const ObjectiveFn& objective, const ConstraintFn& constraints,
                                   int n_constraints, int n, const SolverConfig& config) {
    if (n < 1) throw DimensionMismatch("dimension must be >= 1");

    std::vector<std::vector<double>> starts;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(n, 0.0);
        v[static_cast<std::size_t>(i)] = 1.0;
        starts.push_back(std::move(v));
    }
    starts.emplace_back(n, 0.0);               // all budget left to the fallback option
    starts.emplace_back(n, 1.0 / (n + 1));     // equal split

    SolverResult best;
    bool have_best = false;
    int total_evals = 0;
    for (const auto& s : starts) {
        SolverResult r = run_single(objective, constraints, n_constraints, n, config, s);
        total_evals += r.evals;
        // Strict improvement keeps the earliest start on ties.
        bool better;
        if (!have_best) better = true;
        else if (r.feasible != best.feasible) better = r.feasible;
        else better = r.objective > best.objective;
        if (better) {
            best = r;
            have_best = true;
        }
    }

    // Refinement restarts from the incumbent with shrinking initial radii:
    // each rebuilt simplex resolves flat directions the previous pass left
    // at coarse accuracy.
    for (double radius : {1e-3, 1e-5}) {
        SolverConfig refine = config;
        refine.rho_begin = std::clamp(radius, config.rho_end, config.rho_begin);
        SolverResult polished =
            run_single(objective, constraints, n_constraints, n, refine, best.x);
        total_evals += polished.evals;
        bool better;
        if (polished.feasible != best.feasible) better = polished.feasible;
        else better = polished.objective > best.objective;
        if (better) best = polished;
    }

    best.evals = total_evals;
    return best;
}

}  // namespace poolopt
