#include "nparc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nparc/errors.hpp"

namespace nparc {

DiscreteMeasure DiscreteMeasure::uniform(Matrix points) {
    const auto count = points.cols();
    return DiscreteMeasure{std::move(points), Vector::Constant(count, 1.0 / count)};
}

void DiscreteMeasure::validate() const {
    if (points.cols() != weights.size() || weights.size() == 0)
        throw InvalidInput("measure needs one weight per atom and at least one atom");
    if ((weights.array() < 0.0).any()) throw InvalidInput("measure weights must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw InvalidInput("measure weights must sum to 1");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassEps = 1e-14;
// Weights are only required to sum to 1 within 1e-12, so cumulative masses
// cannot be compared more finely than that.
constexpr double kMismatchTol = 1e-12;

}  // namespace

TransportPlan optimal_transport(const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim()) throw InvalidInput("measures live in different dimensions");
    if (!(p >= 1.0)) throw InvalidInput("Wasserstein order must be >= 1");
    if (a.size() > kMaxTransportAtoms || b.size() > kMaxTransportAtoms)
        throw CapacityError("exact transport supports at most " +
                            std::to_string(kMaxTransportAtoms) + " atoms per measure");

    const int m = a.size();
    const int n = b.size();
    Matrix cost(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            cost(i, j) = std::pow((a.points.col(i) - b.points.col(j)).norm(), p);

    Matrix flow = Matrix::Zero(m, n);
    Vector supply = a.weights;
    Vector demand = b.weights;
    // Node potentials: supplies [0, m), demands [m, m + n). The implicit super
    // source keeps potential 0.
    Vector pot = Vector::Zero(m + n);
    Vector dist(m + n);
    std::vector<int> parent(static_cast<std::size_t>(m + n));
    std::vector<char> done(static_cast<std::size_t>(m + n));

    const long max_rounds = 20L * (m + n) * (m + n) + 100;
    for (long round = 0;; ++round) {
        if (round > max_rounds) throw Error("TRANSPORT", "augmenting path search did not terminate");
        if (supply.maxCoeff() <= kMassEps || demand.maxCoeff() <= kMassEps) break;

        dist.setConstant(kInf);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < m; ++i) {
            if (supply(i) > kMassEps) {
                dist(i) = -pot(i);
                parent[static_cast<std::size_t>(i)] = -1;
            }
        }
        for (int iter = 0; iter < m + n; ++iter) {
            int v = -1;
            double best = kInf;
            for (int k = 0; k < m + n; ++k)
                if (!done[static_cast<std::size_t>(k)] && dist(k) < best) best = dist(k), v = k;
            if (v < 0) break;
            done[static_cast<std::size_t>(v)] = 1;
            if (v < m) {
                for (int j = 0; j < n; ++j) {
                    if (done[static_cast<std::size_t>(m + j)]) continue;
                    const double nd = dist(v) + cost(v, j) + pot(v) - pot(m + j);
                    if (nd < dist(m + j)) dist(m + j) = nd, parent[static_cast<std::size_t>(m + j)] = v;
                }
            } else {
                const int j = v - m;
                for (int i = 0; i < m; ++i) {
                    if (flow(i, j) <= kMassEps || done[static_cast<std::size_t>(i)]) continue;
                    const double nd = dist(v) - cost(i, j) + pot(v) - pot(i);
                    if (nd < dist(i)) dist(i) = nd, parent[static_cast<std::size_t>(i)] = v;
                }
            }
        }

        int target = -1;
        for (int j = 0; j < n; ++j)
            if (demand(j) > kMassEps && (target < 0 || dist(m + j) < dist(m + target))) target = j;
        if (target < 0 || !std::isfinite(dist(m + target)))
            throw Error("TRANSPORT", "no augmenting path: measures have different mass");
        const double reach = dist(m + target);
        for (int k = 0; k < m + n; ++k) pot(k) += std::min(dist(k), reach);

        // Bottleneck along the path target <- supply <- demand <- ... <- source.
        double delta = demand(target);
        int v = m + target;
        int source = -1;
        while (true) {
            const int i = parent[static_cast<std::size_t>(v)];  // supply feeding demand v
            const int back = parent[static_cast<std::size_t>(i)];
            if (back < 0) {
                source = i;
                break;
            }
            delta = std::min(delta, flow(i, back - m));
            v = back;
        }
        delta = std::min(delta, supply(source));

        v = m + target;
        while (true) {
            const int i = parent[static_cast<std::size_t>(v)];
            flow(i, v - m) += delta;
            const int back = parent[static_cast<std::size_t>(i)];
            if (back < 0) break;
            flow(i, back - m) -= delta;
            v = back;
        }
        supply(source) -= delta;
        demand(target) -= delta;
    }

    TransportPlan plan;
    plan.cost = (flow.array() * cost.array()).sum();
    plan.flow = std::move(flow);
    return plan;
}

double wasserstein_p(const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
    const double c = optimal_transport(a, b, p).cost;
    return std::pow(std::max(c, 0.0), 1.0 / p);
}

double premetric_dF(const Vector& xi, const Vector& zeta, const TrueModel& model) {
    if (xi.size() != model.dim() || zeta.size() != model.dim())
        throw InvalidInput("premetric: dimension mismatch");
    return (model.to_uniform(xi) - model.to_uniform(zeta)).norm();
}

double marginal_mismatch(const DiscreteMeasure& c) {
    c.validate();
    double total = 0.0;
    std::vector<std::pair<double, double>> atoms(static_cast<std::size_t>(c.size()));
    for (int i = 0; i < c.dim(); ++i) {
        for (int j = 0; j < c.size(); ++j)
            atoms[static_cast<std::size_t>(j)] = {c.points(i, j), c.weights(j)};
        std::sort(atoms.begin(), atoms.end());
        double cdf = 0.0;
        double worst = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            cdf += atoms[k].second;
            if (k + 1 < atoms.size() && atoms[k + 1].first == atoms[k].first) continue;
            const double gap = std::abs(cdf - atoms[k].first);
            if (gap > kMismatchTol) worst = std::max(worst, gap);
        }
        total += worst;
    }
    return total;
}

}  // namespace nparc
