#include "nparc/transition.hpp"

#include <cmath>
#include <string>

#include "nparc/errors.hpp"

namespace nparc {

ValueFn terminal_value_fn(double risk_aversion) {
    if (!(risk_aversion > 0.0)) throw InvalidConfig("risk_aversion must be > 0");
    return [risk_aversion](const Vector& reduced, Vector* gradient) {
        if (gradient) {
            gradient->setZero(reduced.size());
            (*gradient)(0) = loss_derivative(reduced(0), risk_aversion);
        }
        return loss(reduced(0), risk_aversion);
    };
}

ValueFn surrogate_value_fn(const GpSurrogate& gp) {
    return [&gp](const Vector& reduced, Vector* gradient) {
        if (gradient) return gp.predict_with_gradient(reduced, *gradient);
        return gp.predict(reduced);
    };
}

Transition transition_G(const AugmentedState& y, const WeightedSample& copula, const Vector& a,
                        const Vector& z, const TrueModel& model, const MarketParams& market) {
    if (y.time >= market.horizon)
        throw InvalidInput("cannot step past the terminal time " + std::to_string(market.horizon));
    const int n = copula.dim();
    const int cov = n * (n - 1) / 2;
    const auto summary_len = static_cast<int>(y.copula_summary.size());
    if (summary_len <= cov || (summary_len - cov) % n != 0)
        throw InvalidInput("copula summary length does not match the copula dimension");
    const int moments = (summary_len - cov) / n;

    Transition out;
    out.copula = update_copula(copula, z, model);
    out.state.wealth = wealth_step(y.wealth, a, z, market.rate_per_period);
    out.state.copula_summary = summarize(out.copula, moments).flatten();
    out.state.time = y.time + 1;
    return out;
}

SuccessorValue successor_value(const SuccessorContext& ctx, const Vector& a, const Vector& u,
                               bool gradients) {
    const TrueModel& model = *ctx.model;
    const int n = model.dim();
    SuccessorValue out;
    out.z = model.from_uniform(u);
    Matrix jac;
    Vector reduced(1 + ctx.summary.size());
    reduced(0) = wealth_step(ctx.wealth, a, out.z, ctx.rate);
    reduced.tail(ctx.summary.size()) =
        advance_summary(ctx.summary, n, ctx.moments, ctx.count, u, gradients ? &jac : nullptr);
    if (!gradients) {
        out.value = ctx.next(reduced, nullptr);
        return out;
    }
    Vector grad;
    out.value = ctx.next(reduced, &grad);
    const double dx = grad(0);
    const Vector dsummary = grad.tail(ctx.summary.size());
    out.d_control.resize(n);
    out.d_uniform = jac.transpose() * dsummary;
    for (int i = 0; i < n; ++i) {
        const double growth = std::exp(out.z(i));
        out.d_control(i) = dx * ctx.wealth * (growth - (1.0 + ctx.rate));
        // dz/du = 1 / f_i(z)
        out.d_uniform(i) +=
            dx * ctx.wealth * a(i) * growth / model.marginal_pdf(i, out.z(i));
    }
    return out;
}

}  // namespace nparc
