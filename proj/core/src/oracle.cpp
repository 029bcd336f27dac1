#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "aggrisk/engine.hpp"
#include "aggrisk/errors.hpp"
#include "aggrisk/financial.hpp"

namespace aggrisk {

// Single-threaded reference evaluation. It goes out of its way NOT to share
// machinery with run_query: events are looked up in one hash map per ELT
// (instead of the combined index), trials are walked in a plain nested loop,
// and there is no job splitting. What it does share is the arithmetic
// contract: per (trial, layer) the payouts stream through the same term
// functions in time order, per-layer sums accumulate ascending by elt_id,
// and per (group, trial) the layer sums fold in ascending layer order. That
// shared fold order is what makes the parallel engine comparable bit for bit.
LossReport sequential_oracle(const QueryPlan& plan, const Dataset& dataset) {
  if (dataset.num_trials() == 0) {
    throw DataError(DataError::Kind::InvariantViolation, "yet.csv", 0,
                    "the year event table contains no trials");
  }

  // Per-ELT event lookup tables, selected ELTs only.
  std::unordered_map<EltId, std::unordered_map<EventId, const EeltEntry*>> elt_lookup;
  for (EltId elt : plan.elt_ids) {
    const auto it = dataset.eelts.find(elt);
    if (it == dataset.eelts.end()) {
      throw DataError(DataError::Kind::InvariantViolation, "", 0,
                      "selected elt " + std::to_string(elt) + " has no loaded event loss table");
    }
    auto& events = elt_lookup[elt];
    for (const EeltEntry& entry : it->second) events.emplace(entry.event_id, &entry);
  }

  // Selected layers in plan order (ascending layer_id), each with its
  // covered-and-selected ELTs ascending.
  struct OracleLayer {
    const LayerRecord* rec;
    std::vector<EltId> elts;
  };
  std::vector<OracleLayer> layers;
  layers.reserve(plan.layer_ids.size());
  for (LayerId id : plan.layer_ids) {
    const LayerRecord* rec = dataset.find_layer(id);
    if (rec == nullptr) {
      throw DataError(DataError::Kind::InvariantViolation, "", 0,
                      "selected layer " + std::to_string(id) + " not present in the dataset");
    }
    OracleLayer layer{rec, {}};
    for (EltId elt : rec->elt_ids) {
      if (elt_lookup.contains(elt)) layer.elts.push_back(elt);
    }
    std::sort(layer.elts.begin(), layer.elts.end());
    layers.push_back(std::move(layer));
  }

  // Group annotation, resolved independently of the engine's resolver.
  const auto annotations = apply_event_filter(plan.query, dataset.catalogue);
  const bool need_attrs = plan.need_region || plan.need_peril;
  const bool grouped = !plan.grouping.empty();
  const bool su = plan.query.secondary_uncertainty;

  std::map<std::string, std::vector<double>> totals;  // key -> per-trial losses
  if (!grouped) totals.emplace("TOTAL", std::vector<double>(dataset.num_trials(), 0.0));

  std::vector<AggregateState> agg(layers.size());
  std::map<std::string, std::vector<double>> trial_acc;  // key -> per-layer sums

  std::set<EventId> missing;
  for (std::size_t trial_idx = 0; trial_idx < dataset.trials.size(); ++trial_idx) {
    const TrialRows& trial = dataset.trials[trial_idx];
    const std::size_t m = trial.rows.size();
    std::fill(agg.begin(), agg.end(), AggregateState{});
    trial_acc.clear();

    for (std::uint32_t row : trial.rows) {
      const YetRecord& ev = dataset.yet[row];

      std::string key = "TOTAL";
      if (grouped) {
        const EventAttrs* attrs = nullptr;
        if (need_attrs) {
          const auto it = annotations.find(ev.event_id);
          if (it == annotations.end()) {
            missing.insert(ev.event_id);
            continue;
          }
          attrs = &it->second;
        }
        key = make_group_key(plan.grouping, attrs, ev.time_index, m);
      }

      auto acc_it = trial_acc.find(key);
      if (acc_it == trial_acc.end()) {
        acc_it = trial_acc.emplace(key, std::vector<double>(layers.size(), 0.0)).first;
      }
      std::vector<double>& acc = acc_it->second;

      for (std::size_t rank = 0; rank < layers.size(); ++rank) {
        double layer_loss = 0.0;
        for (EltId elt : layers[rank].elts) {
          const auto& events = elt_lookup.at(elt);
          const auto found = events.find(ev.event_id);
          if (found == events.end()) continue;
          layer_loss += sample_event_loss(*found->second, ev.z_pe, su);
        }
        const LayerTerms& terms = layers[rank].rec->terms;
        const double occ = apply_occurrence_terms(layer_loss, terms);
        const auto [next, increment] = apply_aggregate_terms(agg[rank], occ, terms);
        agg[rank] = next;
        acc[rank] += increment;
      }
    }

    for (const auto& [key, acc] : trial_acc) {
      auto it = totals.find(key);
      if (it == totals.end()) {
        it = totals.emplace(key, std::vector<double>(dataset.num_trials(), 0.0)).first;
      }
      double& total = it->second[trial_idx];
      for (double layer_sum : acc) total += layer_sum;
    }
  }
  if (!missing.empty()) {
    std::vector<EventId> ids(missing.begin(), missing.end());
    throw AnnotationError("events referenced by the YET are missing from the catalogue", ids);
  }

  std::vector<ReportRow> rows;
  for (const auto& [key, losses] : totals) {
    auto group_rows = reduce_group(key, losses, plan.reducer);
    rows.insert(rows.end(), group_rows.begin(), group_rows.end());
  }
  return assemble_report(std::move(rows), report_metadata(plan, dataset));
}

}  // namespace aggrisk
