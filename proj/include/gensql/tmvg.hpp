#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "gensql/ami.hpp"
#include "gensql/linalg.hpp"
#include "gensql/numeric.hpp"

namespace gensql {

// A truncated multivariate Gaussian: x ~ N(mean, cov) restricted to
// lower <= A x <= upper. Closed under point conditioning (Gaussian
// conditioning plus constraint projection) and under axis-aligned event
// conditioning (appending constraint rows).
struct TmvgState {
  std::vector<double> mean;
  Matrix cov;  // d x d, SPD
  Matrix a;    // m x d (m == 0 means untruncated)
  std::vector<double> lower, upper;

  std::size_t dim() const { return mean.size(); }
  std::size_t constraint_count() const { return lower.size(); }
};

inline void tmvg_validate(const TmvgState& s) {
  if (s.cov.rows() != s.dim() || s.cov.cols() != s.dim())
    throw Error(Stage::Io, "tmvg", "covariance shape does not match the mean");
  if (!s.cov.symmetric()) throw Error(Stage::Io, "tmvg", "covariance is not symmetric");
  try {
    cholesky(s.cov);
  } catch (const EvalError&) {
    throw Error(Stage::Io, "tmvg", "covariance is not positive definite");
  }
  if (s.a.rows() != s.lower.size() || s.lower.size() != s.upper.size())
    throw Error(Stage::Io, "tmvg", "constraint rows and bounds disagree");
  if (s.a.rows() > 0 && s.a.cols() != s.dim())
    throw Error(Stage::Io, "tmvg", "constraint width does not match the dimension");
  for (std::size_t i = 0; i < s.lower.size(); ++i)
    if (!(s.lower[i] <= s.upper[i]))
      throw Error(Stage::Io, "tmvg",
                  "constraint " + std::to_string(i) + " has lower > upper");
}

// Gaussian conditioning on pinned dimensions (Schur complement), with the
// constraint system projected onto the free dimensions.
inline TmvgState tmvg_cond0(const TmvgState& s, const std::vector<int>& pinned_dims,
                            const std::vector<double>& values) {
  std::vector<int> free_dims;
  for (int d = 0; d < static_cast<int>(s.dim()); ++d) {
    bool pinned = false;
    for (int p : pinned_dims) pinned |= (p == d);
    if (!pinned) free_dims.push_back(d);
  }
  Matrix s11 = s.cov.submatrix(free_dims, free_dims);
  Matrix s12 = s.cov.submatrix(free_dims, pinned_dims);
  Matrix s22 = s.cov.submatrix(pinned_dims, pinned_dims);
  Matrix l22 = cholesky(s22);  // throws when singular

  std::vector<double> dev(pinned_dims.size());
  for (std::size_t i = 0; i < pinned_dims.size(); ++i)
    dev[i] = values[i] - s.mean[pinned_dims[i]];
  std::vector<double> w = cholesky_solve(l22, dev);  // s22^-1 (v - mu2)

  TmvgState out;
  out.mean.resize(free_dims.size());
  for (std::size_t i = 0; i < free_dims.size(); ++i) {
    double m = s.mean[free_dims[i]];
    for (std::size_t j = 0; j < pinned_dims.size(); ++j) m += s12.at(i, j) * w[j];
    out.mean[i] = m;
  }
  Matrix k = cholesky_solve(l22, s12.transpose());  // s22^-1 s21
  Matrix delta = s12 * k;
  out.cov = Matrix(free_dims.size(), free_dims.size());
  for (std::size_t i = 0; i < free_dims.size(); ++i)
    for (std::size_t j = 0; j < free_dims.size(); ++j)
      out.cov.at(i, j) = s11.at(i, j) - delta.at(i, j);

  // project constraints: bounds shift by the pinned contribution
  out.a = Matrix(s.a.rows(), free_dims.size());
  out.lower = s.lower;
  out.upper = s.upper;
  for (std::size_t r = 0; r < s.a.rows(); ++r) {
    double shift = 0.0;
    for (std::size_t j = 0; j < pinned_dims.size(); ++j)
      shift += s.a.at(r, static_cast<std::size_t>(pinned_dims[j])) * values[j];
    out.lower[r] -= shift;
    out.upper[r] -= shift;
    for (std::size_t j = 0; j < free_dims.size(); ++j)
      out.a.at(r, j) = s.a.at(r, static_cast<std::size_t>(free_dims[j]));
  }
  return out;
}

// Event conditioning appends unit constraint rows; no numeric work.
inline TmvgState tmvg_truncate(const TmvgState& s, const std::vector<int>& dims,
                               const std::vector<Interval>& bounds) {
  TmvgState out = s;
  std::size_t m0 = s.a.rows();
  Matrix a(m0 + dims.size(), s.dim());
  for (std::size_t r = 0; r < m0; ++r)
    for (std::size_t c = 0; c < s.dim(); ++c) a.at(r, c) = s.a.at(r, c);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    a.at(m0 + i, static_cast<std::size_t>(dims[i])) = 1.0;
    out.lower.push_back(bounds[i].lo);
    out.upper.push_back(bounds[i].hi);
  }
  out.a = std::move(a);
  return out;
}

inline bool tmvg_in_region(const TmvgState& s, const std::vector<double>& x) {
  for (std::size_t r = 0; r < s.a.rows(); ++r) {
    double v = 0.0;
    for (std::size_t c = 0; c < s.dim(); ++c) v += s.a.at(r, c) * x[c];
    if (v < s.lower[r] || v > s.upper[r]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// RowModel adapter
// ---------------------------------------------------------------------------

class TmvgModel final : public RowModel {
 public:
  TmvgModel(Schema schema, TmvgState state, int particles = 1000,
            std::map<int, double> pinned = {}, std::vector<int> free_cols = {})
      : RowModel(std::move(schema)),
        state_(std::move(state)),
        particles_(particles),
        pinned_(std::move(pinned)) {
    if (free_cols.empty()) {
      for (int c = 0; c < static_cast<int>(this->schema().columns.size()); ++c)
        if (!pinned_.count(c)) free_cols_.push_back(c);
    } else {
      free_cols_ = std::move(free_cols);
    }
    if (free_cols_.size() != state_.dim())
      throw EvalError("tmvg", "state dimension does not match free columns");
    if (state_.dim() > 0) chol_ = cholesky(state_.cov);
  }

  const TmvgState& state() const { return state_; }
  int particles() const { return particles_; }

  ModelHandle with_particles(int n) const override {
    if (n == particles_) return nullptr;
    return std::make_shared<TmvgModel>(schema(), state_, n, pinned_, free_cols_);
  }

  ModelHandle condition(const Assignment& c0, const EventSet& c1) const override {
    TmvgState cur = state_;
    std::map<int, double> pinned = pinned_;
    std::vector<int> free_cols = free_cols_;

    if (!c1.is_full()) apply_event(cur, c1, pinned, free_cols);

    if (!c0.empty()) {
      std::vector<int> dims;
      std::vector<double> values;
      for (const auto& [col, v] : c0.pins) {
        if (!v.is_number())
          throw EvalError("tmvg-event", "gaussian columns take numeric values");
        auto it = pinned.find(col);
        if (it != pinned.end()) {
          if (it->second != v.as_number())
            throw EvalError("null-conditioning", "column pinned to two different values");
          continue;
        }
        int dim = dim_of(free_cols, col);
        dims.push_back(dim);
        values.push_back(v.as_number());
        pinned[col] = v.as_number();
      }
      if (!dims.empty()) {
        cur = tmvg_cond0(cur, dims, values);
        std::vector<int> remaining;
        for (int c : free_cols)
          if (!pinned.count(c)) remaining.push_back(c);
        free_cols = std::move(remaining);
      }
    }
    return std::make_shared<TmvgModel>(schema(), std::move(cur), particles_, std::move(pinned),
                                       std::move(free_cols));
  }

  Row simulate(RngStream& rng) const override {
    std::vector<double> x = rejection_sample(rng);
    return assemble(x);
  }

  double logpdf(const Assignment& target, RngStream& rng) const override {
    std::vector<int> dims;
    std::vector<double> values;
    for (const auto& [col, v] : target.pins) {
      if (!v.is_number()) return kNegInf;
      auto it = pinned_.find(col);
      if (it != pinned_.end()) {
        if (it->second != v.as_number()) return kNegInf;
        continue;
      }
      dims.push_back(dim_of(free_cols_, col));
      values.push_back(v.as_number());
    }
    if (dims.empty()) return 0.0;
    Matrix sub = state_.cov.submatrix(dims, dims);
    Matrix l = cholesky(sub);
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < dims.size(); ++i) dev[i] = values[i] - state_.mean[dims[i]];
    std::vector<double> w = cholesky_solve(l, dev);
    double quad = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) quad += dev[i] * w[i];
    double log_density = -0.5 * quad - 0.5 * log_det_from_cholesky(l) -
                         0.5 * static_cast<double>(dims.size()) * std::log(2.0 * M_PI);
    return log_density - std::log(region_mass(rng));
  }

  double prob(const EventSet& target, RngStream& rng) const override {
    // pinned columns resolve the target deterministically on their axes
    std::vector<std::pair<int, Interval>> checks;  // free dim -> interval
    double det = 1.0;
    if (target.rects.size() != 1)
      throw EvalError("tmvg-event",
                      "gaussian models accept axis-aligned conjunctions of bounds only");
    const Rect& rect = target.rects[0];
    for (const auto& [col, set] : rect.sets) {
      if (!set.numeric || set.intervals.size() != 1)
        throw EvalError("tmvg-event",
                        "gaussian models accept axis-aligned conjunctions of bounds only");
      auto it = pinned_.find(col);
      if (it != pinned_.end()) {
        if (!set.contains(Value::real(it->second))) det = 0.0;
        continue;
      }
      checks.emplace_back(dim_of(free_cols_, col), set.intervals[0]);
    }
    if (det == 0.0) return 0.0;
    if (checks.empty() && state_.constraint_count() == 0) return 1.0;

    std::size_t in_region = 0, in_both = 0;
    for (int i = 0; i < particles_; ++i) {
      std::vector<double> x = draw(rng);
      if (!tmvg_in_region(state_, x)) continue;
      ++in_region;
      bool ok = true;
      for (const auto& [dim, iv] : checks) ok &= iv.contains(x[dim]);
      if (ok) ++in_both;
    }
    if (in_region == 0) return 0.0;
    return static_cast<double>(in_both) / static_cast<double>(in_region);
  }

 private:
  TmvgState state_;
  int particles_;
  std::map<int, double> pinned_;
  std::vector<int> free_cols_;
  Matrix chol_;

  static int dim_of(const std::vector<int>& free_cols, int col) {
    for (std::size_t i = 0; i < free_cols.size(); ++i)
      if (free_cols[i] == col) return static_cast<int>(i);
    throw EvalError("unknown-column", "column is not part of the gaussian state");
  }

  void apply_event(TmvgState& cur, const EventSet& c1, std::map<int, double>& pinned,
                   const std::vector<int>& free_cols) const {
    if (c1.is_empty()) throw EvalError("null-conditioning", "event has probability zero");
    if (c1.rects.size() != 1)
      throw EvalError("tmvg-event",
                      "gaussian models accept axis-aligned conjunctions of bounds only");
    std::vector<int> dims;
    std::vector<Interval> bounds;
    for (const auto& [col, set] : c1.rects[0].sets) {
      if (!set.numeric || set.intervals.size() != 1)
        throw EvalError("tmvg-event",
                        "gaussian models accept axis-aligned conjunctions of bounds only");
      auto it = pinned.find(col);
      if (it != pinned.end()) {
        if (!set.contains(Value::real(it->second)))
          throw EvalError("null-conditioning", "event excludes the pinned value");
        continue;
      }
      dims.push_back(dim_of(free_cols, col));
      bounds.push_back(set.intervals[0]);
    }
    if (!dims.empty()) cur = tmvg_truncate(cur, dims, bounds);
  }

  std::vector<double> draw(RngStream& rng) const {
    std::size_t d = state_.dim();
    std::vector<double> z(d);
    for (double& v : z) v = rng.gaussian();
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) {
      double s = state_.mean[i];
      for (std::size_t j = 0; j <= i; ++j) s += chol_.at(i, j) * z[j];
      x[i] = s;
    }
    return x;
  }

  std::vector<double> rejection_sample(RngStream& rng) const {
    if (state_.dim() == 0) return {};
    const int budget = 100000;
    for (int i = 0; i < budget; ++i) {
      std::vector<double> x = draw(rng);
      if (tmvg_in_region(state_, x)) return x;
    }
    throw EvalError("truncation-unreachable",
                    "no sample satisfied the truncation region within the attempt budget");
  }

  // Monte Carlo estimate of the truncation region's mass, exact 1 when there
  // are no constraints.
  double region_mass(RngStream& rng) const {
    if (state_.constraint_count() == 0) return 1.0;
    std::size_t hits = 0;
    for (int i = 0; i < particles_; ++i)
      if (tmvg_in_region(state_, draw(rng))) ++hits;
    if (hits == 0)
      throw EvalError("truncation-unreachable", "truncation region mass estimated to be zero");
    return static_cast<double>(hits) / static_cast<double>(particles_);
  }

  Row assemble(const std::vector<double>& x) const {
    Row row(schema().columns.size(), Value::null());
    for (const auto& [col, v] : pinned_) row[col] = Value::real(v);
    for (std::size_t i = 0; i < free_cols_.size(); ++i) row[free_cols_[i]] = Value::real(x[i]);
    return row;
  }
};

}  // namespace gensql
