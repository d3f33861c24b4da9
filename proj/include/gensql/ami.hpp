#pragma once

#include <memory>
#include <vector>

#include "gensql/error.hpp"
#include "gensql/events.hpp"
#include "gensql/rng.hpp"
#include "gensql/value.hpp"

namespace gensql {

enum class Indep { Independent, Unknown };

// The model interface every backend implements. A handle is an immutable,
// possibly-conditioned distribution over rows of a fixed schema; conditioning
// produces a new handle. The classic three-method surface
// (simulate/logpdf/prob over condition pairs) is provided as a facade below,
// which is also where the null-row convention for impossible conditioning
// lives.
class RowModel {
 public:
  explicit RowModel(Schema schema) : schema_(std::move(schema)) {}
  virtual ~RowModel() = default;

  const Schema& schema() const { return schema_; }

  // Condition on a point assignment and an event. Throws
  // EvalError("null-conditioning") when the event has zero probability or the
  // point has zero density.
  virtual std::shared_ptr<const RowModel> condition(const Assignment& c0,
                                                    const EventSet& c1) const = 0;

  // One sample from the (conditioned) distribution, as a full row.
  virtual Row simulate(RngStream& rng) const = 0;

  // Marginal log density at the target assignment. May be -inf.
  virtual double logpdf(const Assignment& target, RngStream& rng) const = 0;

  // Probability of the target event, in [0, 1].
  virtual double prob(const EventSet& target, RngStream& rng) const = 0;

  // Structural independence oracle: certifies cols_a independent of cols_b
  // under the unconditioned model, or answers Unknown.
  virtual Indep independent(const std::vector<int>&, const std::vector<int>&) const {
    return Indep::Unknown;
  }

  // Approximate backends rebuild themselves at a new compute budget; exact
  // backends return null (meaning: unchanged).
  virtual std::shared_ptr<const RowModel> with_particles(int) const { return nullptr; }

 private:
  Schema schema_;
};

using ModelHandle = std::shared_ptr<const RowModel>;

// Conditioning on a null-measure event yields the distribution concentrated
// on the all-Null row.
class NullRowModel final : public RowModel {
 public:
  explicit NullRowModel(Schema schema) : RowModel(std::move(schema)) {}

  ModelHandle condition(const Assignment&, const EventSet&) const override {
    return std::make_shared<NullRowModel>(schema());
  }
  Row simulate(RngStream&) const override {
    return Row(schema().columns.size(), Value::null());
  }
  double logpdf(const Assignment&, RngStream&) const override { return kNegInf; }
  double prob(const EventSet&, RngStream&) const override { return 0.0; }
};

inline bool is_null_model(const RowModel& m) {
  return dynamic_cast<const NullRowModel*>(&m) != nullptr;
}

// ---------------------------------------------------------------------------
// Three-method facade
// ---------------------------------------------------------------------------

inline ModelHandle ami_condition(const ModelHandle& m, const Assignment& c0,
                                 const EventSet& c1) {
  if (c0.empty() && c1.is_full()) return m;
  try {
    return m->condition(c0, c1);
  } catch (const EvalError& e) {
    if (e.rule() == "null-conditioning") return std::make_shared<NullRowModel>(m->schema());
    throw;
  }
}

inline Row ami_simulate(const ModelHandle& m, const Assignment& c0, const EventSet& c1,
                        RngStream& rng) {
  return ami_condition(m, c0, c1)->simulate(rng);
}

inline double ami_logpdf(const ModelHandle& m, const Assignment& c0, const EventSet& c1,
                         const Assignment& target, RngStream& rng) {
  return ami_condition(m, c0, c1)->logpdf(target, rng);
}

inline double ami_prob(const ModelHandle& m, const Assignment& c0, const EventSet& c1,
                       const EventSet& target, RngStream& rng) {
  double p = ami_condition(m, c0, c1)->prob(target, rng);
  if (p < 0.0) return 0.0;
  if (p > 1.0) return 1.0;
  return p;
}

}  // namespace gensql
