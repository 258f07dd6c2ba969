#include "nparc/copula.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "nparc/errors.hpp"

namespace nparc {

WeightedSample::WeightedSample(Matrix points, int t0) : points_(std::move(points)), t0_(t0) {
    if (t0_ < 0) throw InvalidInput("t0 must be nonnegative");
    if (points_.cols() < t0_) throw InvalidInput("sample has fewer points than t0");
    if (points_.size() > 0 && (points_.minCoeff() < 0.0 || points_.maxCoeff() > 1.0))
        throw InvalidInput("pseudo-observations must lie in [0,1]");
}

WeightedSample WeightedSample::from_data(const Matrix& data, const TrueModel& model) {
    if (data.cols() != model.dim()) throw DataError("data columns do not match model dimension");
    Matrix pts(model.dim(), data.rows());
    for (Eigen::Index j = 0; j < data.rows(); ++j)
        pts.col(j) = pseudo_observe(data.row(j).transpose(), model);
    return WeightedSample(std::move(pts), static_cast<int>(data.rows()));
}

double WeightedSample::cdf(const Vector& u) const {
    if (size() == 0) return 0.0;
    int hits = 0;
    for (int j = 0; j < size(); ++j)
        if ((points_.col(j).array() <= u.array()).all()) ++hits;
    return static_cast<double>(hits) / size();
}

WeightedSample WeightedSample::updated(const Vector& point) const {
    if (point.size() != dim() && size() > 0)
        throw InvalidInput("point dimension does not match sample");
    Matrix next(point.size(), size() + 1);
    next.leftCols(size()) = points_;
    next.col(size()) = point;
    return WeightedSample(std::move(next), t0_);
}

Vector CopulaSummary::flatten() const {
    const auto n = marginal_moments.rows();
    const auto m = marginal_moments.cols();
    Vector flat(n * m + pair_covariances.size());
    for (Eigen::Index i = 0; i < n; ++i) flat.segment(i * m, m) = marginal_moments.row(i);
    flat.tail(pair_covariances.size()) = pair_covariances;
    return flat;
}

CopulaSummary CopulaSummary::unflatten(const Vector& flat, int dim, int moments) {
    if (flat.size() != summary_size(dim, moments))
        throw InvalidInput("summary vector has the wrong length");
    CopulaSummary s;
    s.marginal_moments.resize(dim, moments);
    for (int i = 0; i < dim; ++i)
        s.marginal_moments.row(i) = flat.segment(i * moments, moments).transpose();
    s.pair_covariances = flat.tail(dim * (dim - 1) / 2);
    return s;
}

int summary_size(int dim, int moments) { return dim * moments + dim * (dim - 1) / 2; }

Vector pseudo_observe(const Vector& z, const TrueModel& model) {
    if (z.size() != model.dim()) throw InvalidInput("noise dimension does not match model");
    return model.to_uniform(z);
}

WeightedSample update_copula(const WeightedSample& c, const Vector& z, const TrueModel& model) {
    return c.updated(pseudo_observe(z, model));
}

CopulaSummary summarize(const WeightedSample& c, int moments) {
    if (moments < 1) throw InvalidInput("moment count must be >= 1");
    if (c.size() == 0) throw InvalidInput("cannot summarize an empty sample");
    const int n = c.dim();
    const double w = c.weight();
    CopulaSummary s;
    s.marginal_moments = Matrix::Zero(n, moments);
    const Matrix& pts = c.points();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c.size(); ++j) {
            double p = 1.0;
            for (int k = 0; k < moments; ++k) {
                p *= pts(i, j);
                s.marginal_moments(i, k) += p;
            }
        }
    }
    s.marginal_moments *= w;
    s.pair_covariances.resize(n * (n - 1) / 2);
    int idx = 0;
    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            double cross = pts.row(i).dot(pts.row(k)) * w;
            s.pair_covariances(idx++) =
                cross - s.marginal_moments(i, 0) * s.marginal_moments(k, 0);
        }
    }
    return s;
}

Vector advance_summary(const Vector& flat, int dim, int moments, int count, const Vector& u,
                       Matrix* jacobian) {
    if (moments < 1) throw InvalidInput("moment count must be >= 1");
    if (flat.size() != summary_size(dim, moments) || u.size() != dim)
        throw InvalidInput("advance_summary: dimension mismatch");
    const double c = count;
    const double inv = 1.0 / (c + 1.0);
    Vector next(flat.size());
    if (jacobian) jacobian->setZero(flat.size(), dim);
    for (int i = 0; i < dim; ++i) {
        double p = 1.0;
        for (int k = 1; k <= moments; ++k) {
            const int idx = i * moments + (k - 1);
            const double dp = k * p;  // d(u^k)/du = k u^{k-1}
            p *= u(i);
            next(idx) = (c * flat(idx) + p) * inv;
            if (jacobian) (*jacobian)(idx, i) = dp * inv;
        }
    }
    int idx = dim * moments;
    for (int i = 0; i < dim; ++i) {
        for (int k = i + 1; k < dim; ++k, ++idx) {
            const double mi = flat(i * moments), mk = flat(k * moments);
            const double cross = flat(idx) + mi * mk;
            const double cross_next = (c * cross + u(i) * u(k)) * inv;
            const double mi_next = next(i * moments), mk_next = next(k * moments);
            next(idx) = cross_next - mi_next * mk_next;
            if (jacobian) {
                (*jacobian)(idx, i) = (u(k) - mk_next) * inv;
                (*jacobian)(idx, k) = (u(i) - mi_next) * inv;
            }
        }
    }
    return next;
}

double RadiusConfig::effective_exponent() const {
    return exponent > 0.0 ? exponent : 1.0 / std::max<double>(dim, 2.0 * order);
}

double radius(double alpha, int t0, int t, const RadiusConfig& cfg) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidConfig("alpha must lie in (0,1)");
    if (t0 + t < 1) throw InvalidConfig("t0 + t must be >= 1");
    if (cfg.c_scale < 0.0) throw InvalidConfig("radius scale must be nonnegative");
    return cfg.c_scale * std::pow(static_cast<double>(t0 + t), -cfg.effective_exponent()) *
           std::sqrt(std::log(1.0 / alpha));
}

void write_sample_csv(std::ostream& out, const WeightedSample& c) {
    out << std::setprecision(17);
    for (int i = 0; i < c.dim(); ++i) out << 'u' << (i + 1) << ',';
    out << "weight\n";
    for (int j = 0; j < c.size(); ++j) {
        for (int i = 0; i < c.dim(); ++i) out << c.points()(i, j) << ',';
        out << c.weight() << '\n';
    }
}

WeightedSample read_sample_csv(std::istream& in, int t0) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("sample CSV is empty");
    const auto cols = std::count(line.begin(), line.end(), ',');
    if (cols < 1) throw DataError("sample CSV header must list u columns and weight");
    const int dim = static_cast<int>(cols);
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int i = 0; i <= dim; ++i) {
            if (!std::getline(ss, cell, ',')) throw DataError("sample CSV row is too short");
            if (i < dim) values.push_back(std::stod(cell));
        }
        ++rows;
    }
    Matrix pts(dim, rows);
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < dim; ++i) pts(i, j) = values[static_cast<std::size_t>(j * dim + i)];
    return WeightedSample(std::move(pts), t0);
}

void write_summary_csv(std::ostream& out, const CopulaSummary& s) {
    out << std::setprecision(17) << "kind,i,j,value\n";
    for (Eigen::Index i = 0; i < s.marginal_moments.rows(); ++i)
        for (Eigen::Index k = 0; k < s.marginal_moments.cols(); ++k)
            out << "moment," << (i + 1) << ',' << (k + 1) << ',' << s.marginal_moments(i, k)
                << '\n';
    const auto n = s.marginal_moments.rows();
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = i + 1; k < n; ++k)
            out << "covariance," << (i + 1) << ',' << (k + 1) << ','
                << s.pair_covariances(idx++) << '\n';
}

}  // namespace nparc
