#pragma once

#include <functional>

#include "qbound/matcore.hpp"

namespace qbound {

struct NelderMeadOptions {
    double diameter_tol = 1e-9;
    int max_evaluations = 20000;
    double initial_step = 0.1;
};

struct NelderMeadResult {
    RVec x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimiser (standard reflection/expansion/contraction/shrink).
NelderMeadResult nelder_mead(const std::function<double(const RVec&)>& f, const RVec& x0,
                             const NelderMeadOptions& options = {});

}  // namespace qbound
