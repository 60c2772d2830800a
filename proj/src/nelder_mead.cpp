#include "qbound/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace qbound {

namespace {

double diameter(const std::vector<RVec>& simplex) {
    double d = 0.0;
    for (size_t i = 0; i < simplex.size(); ++i)
        for (size_t j = i + 1; j < simplex.size(); ++j) d = std::max(d, (simplex[i] - simplex[j]).norm());
    return d;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const RVec&)>& f, const RVec& x0,
                             const NelderMeadOptions& options) {
    const auto n = x0.size();
    NelderMeadResult res;
    if (n == 0) {
        res.x = x0;
        res.value = f(x0);
        res.evaluations = 1;
        res.converged = true;
        return res;
    }

    constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    std::vector<RVec> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) pts[i + 1](i) += options.initial_step;
    int evals = 0;
    auto eval = [&](const RVec& x) {
        ++evals;
        return f(x);
    };
    for (auto i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    std::vector<int> order(n + 1);
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
        {
            std::vector<RVec> p2;
            std::vector<double> v2;
            for (int i : order) {
                p2.push_back(pts[i]);
                v2.push_back(vals[i]);
            }
            pts.swap(p2);
            vals.swap(v2);
        }
        if (diameter(pts) < options.diameter_tol) {
            res.converged = true;
            break;
        }
        if (evals >= options.max_evaluations) break;

        RVec centroid = RVec::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);

        const RVec xr = centroid + alpha * (centroid - pts[n]);
        const double fr = eval(xr);
        if (fr < vals[0]) {
            const RVec xe = centroid + gamma * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if (fr < vals[n - 1]) {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        const bool outside = fr < vals[n];
        const RVec xc = outside ? RVec(centroid + rho * (xr - centroid)) : RVec(centroid + rho * (pts[n] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[n])) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for (Eigen::Index i = 1; i <= n; ++i) {
            pts[i] = pts[0] + sigma * (pts[i] - pts[0]);
            vals[i] = eval(pts[i]);
        }
    }
    res.x = pts[0];
    res.value = vals[0];
    res.evaluations = evals;
    return res;
}

}  // namespace qbound
