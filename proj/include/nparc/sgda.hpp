#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nparc/model.hpp"
#include "nparc/transition.hpp"

namespace nparc {

/// beta_{k,K}(u) = C(K,k) u^k (1-u)^{K-k}.
double bernstein(int k, int K, double u);
/// d beta_{k,K} / du.
double bernstein_derivative(int k, int K, double u);

/// Inner-problem iterate: control a, transport multiplier gamma, Bernstein
/// coefficients g (n x (K+1)) and adversarial pseudo-observation u.
struct DualPoint {
    Vector a;
    double gamma = 0.0;
    Matrix g;
    Vector u;
};

struct SgdaConfig {
    /// eta(l) = eta0 / (1 + l / decay_iters), separately for both blocks.
    double descent_step = 0.1;
    double ascent_step = 0.2;
    double decay_iters = 5000.0;
    /// Iterate averaging with weights proportional to l^averaging_power.
    int averaging_power = 1;
    /// Ascent updates of the sampled block before each descent update.
    int ascent_steps = 1;
    int max_iters = 20000;
    /// Stop once the averaged point moves less than stall_tol (in natural
    /// units) over stall_window iterations.
    int stall_window = 500;
    double stall_tol = 1e-4;
    std::uint64_t seed = 0;
    int bernstein_degree = 3;
    double order = 2.0;
    /// u is kept in [u_margin, 1 - u_margin]^n.
    double u_margin = 1e-4;
    /// Full-sample projected descent steps on the dual value after the
    /// stochastic phase (0 disables), and their stationarity tolerance.
    int refine_iters = 100;
    double refine_tol = 1e-3;

    void validate() const;
    bool operator==(const SgdaConfig&) const = default;
};

/// Min-max problem over a descent block x and one ascent block y_j per
/// sample j. Gradients are taken at (x, y_j) for sample j.
class SaddleProblem {
public:
    virtual ~SaddleProblem() = default;
    virtual int samples() const { return 1; }
    virtual void descent_gradient(const Vector& x, const Vector& y, int j, Vector& grad) const = 0;
    virtual void ascent_gradient(const Vector& x, const Vector& y, int j, Vector& grad) const = 0;
    virtual void project_descent(Vector& x) const = 0;
    virtual void project_ascent(Vector& y) const = 0;
    /// Diagonal step preconditioners (step = eta * scale * gradient).
    virtual Vector descent_scale(const Vector& x) const { return Vector::Ones(x.size()); }
    virtual Vector ascent_scale(const Vector& /*x*/, const Vector& y) const {
        return Vector::Ones(y.size());
    }
    /// Units in which the stall rule measures movement.
    virtual Vector descent_units(const Vector& x) const { return Vector::Ones(x.size()); }
    /// Whether the stall rule also watches the averaged ascent blocks.
    virtual bool stall_on_ascent() const { return true; }
    /// Diagnostics for the optional trace; NaN when not provided.
    virtual double trace_objective(const Vector& x, const Matrix& ys) const;
    virtual double trace_scalar(const Vector& x) const;
};

struct SaddleResult {
    Vector x;   // averaged descent block
    Matrix ys;  // averaged ascent blocks, one column per sample
    Vector last_x;
    Matrix last_ys;
    int iterations = 0;
    bool converged = false;
};

/// Alternating projected stochastic gradient descent ascent with decaying
/// steps and polynomial iterate averaging. One sample per iteration, drawn
/// uniformly with a generator seeded from cfg.seed. `trace` (if non-null)
/// receives "l,objective,gamma,step,moved" once per stall window.
SaddleResult sgda(const SaddleProblem& problem, Vector x0, Matrix y0, const SgdaConfig& cfg,
                  std::ostream* trace = nullptr);

/// How the adversary's transport cost is measured.
enum class DistanceSpace {
    Copula,  // Euclidean on [0,1]^n
    Noise,   // Euclidean on z = F*^{-1}(u)
};

/// Fixed data of one inner problem at a design point.
struct DualContext {
    SuccessorContext successor;
    double radius = 0.0;
    ControlBox box;
    DistanceSpace space = DistanceSpace::Copula;
    /// When false the Bernstein block is absent (g treated as 0).
    bool marginal_terms = true;
};

/// v(a, gamma, g, u; u_hat) = gamma (r^p - d^p(u, u_hat))
///     + sum_{i,k} g_ik (1/(K+1) - beta_k(u_i)) + V_next(successor(a, u)).
double dual_objective(const DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                      const SgdaConfig& cfg);

struct DualGradient {
    Vector a;
    double gamma = 0.0;
    Matrix g;
    Vector u;
};

/// Exact gradient of dual_objective with respect to every block.
DualGradient dual_gradient(const DualPoint& pt, const Vector& u_hat, const DualContext& ctx,
                           const SgdaConfig& cfg);

struct SgdaSolution {
    DualPoint point;        // averaged (a, gamma, g); u = worst case of the first sample
    Matrix adversary;       // inner maximizers, one column per data point
    double value = 0.0;     // full-sample dual value at `point`
    int iterations = 0;         // stochastic iterations
    int refine_iterations = 0;
    bool converged = false;     // stall rule met or refinement stationary
};

/// Solves min over (a, gamma, g), max over u of the full-sample dual
/// objective with one adversarial u_j per data point u_hat_j (columns of
/// `pseudo_data`). `init` supplies the starting control and, when gamma > 0,
/// the starting multipliers; otherwise they start at their natural scale.
SgdaSolution sgda_solve(const DualContext& ctx, const Matrix& pseudo_data, const SgdaConfig& cfg,
                        const DualPoint* init = nullptr, std::ostream* trace = nullptr);

/// gamma r^p + sum g / (K+1) + mean_j max_u [V(successor(a,u)) - gamma d^p(u, u_hat_j)
/// - sum g beta(u)], the inner maxima found by projected ascent from every
/// column of `starts` (and from u_hat_j). Writes the maximizers to `argmax`.
double dual_value(const DualPoint& pt, const DualContext& ctx, const Matrix& pseudo_data,
                  const SgdaConfig& cfg, const std::vector<const Matrix*>& starts,
                  Matrix* argmax = nullptr);

}  // namespace nparc
