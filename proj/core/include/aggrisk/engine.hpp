#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "aggrisk/analytics.hpp"
#include "aggrisk/dataset.hpp"
#include "aggrisk/query.hpp"
#include "aggrisk/tables.hpp"

namespace aggrisk {

/// One unit of work: a slice of the selected layers plus the ELTs those
/// layers need. Jobs partition the selected layer list in order.
struct Job {
  std::uint32_t job_id = 0;  // 0-based, ascending
  std::vector<LayerId> layer_ids;
  std::vector<EltId> elt_ids;
};

/// Splits the selected layers into ceil(n/job_size) jobs of at most job_size
/// layers each, preserving order. Each job's elt_ids is the union of its
/// layers' covered ELTs intersected with the plan's selected ELTs.
std::vector<Job> split_jobs(std::span<const LayerId> selected_layers,
                            std::span<const LayerRecord> layers,
                            std::span<const EltId> selected_elts, std::size_t job_size);

struct ExecConfig {
  unsigned workers = std::thread::hardware_concurrency();
  std::size_t job_size = 200;
  std::string dump_yelt_path;  // debug: write the YELT here when nonempty
};

/// Wall time per phase, seconds. Filled by run_query when requested.
struct PhaseTimings {
  double setup = 0.0;
  double map_combine = 0.0;
  double reduce = 0.0;
};

/// Dense per-group, per-trial loss vectors: losses[g][t] is the loss of
/// trial trial_ids[t] in group group_keys[g]; absent trials are zero.
struct TrialLossVector {
  std::vector<std::string> group_keys;  // ascending
  std::vector<TrialId> trial_ids;       // ascending
  std::vector<std::vector<double>> losses;
};

/// Map step for one trial (the mapper of the parallel analysis): walks the
/// trial's events in time order, prices each against every layer, and emits
/// one YLT entry per event with the summed portfolio loss. Layer payouts are
/// accumulated ascending by elt_id within a layer and ascending by layer.
std::vector<YltEntry> map_trial(std::span<const YetRecord> trial, const CombinedElt& celt,
                                std::span<const LayerRecord> layers,
                                std::span<const EltId> selected_elts,
                                bool secondary_uncertainty);

/// Combine step for one trial: annotates events, groups them, and sums
/// losses per group in time order. Empty grouping yields the single group
/// "TOTAL". Throws AnnotationError when a needed attribute is missing.
std::vector<GroupedLoss> combine_trial(std::span<const YltEntry> entries,
                                       const std::unordered_map<EventId, EventAttrs>& annotations,
                                       const GroupBySpec& grouping);

/// Canonical group key of one event occurrence: "TOTAL" without grouping,
/// otherwise '|'-joined "region=..", "peril=..", "<period>=NN" components.
/// The period bucket is ceil(time_index * K / trial_events).
std::string make_group_key(const GroupBySpec& grouping, const EventAttrs* attrs,
                           std::uint32_t time_index, std::size_t trial_events);

/// Metadata block shared by every report of one (plan, dataset) pair.
std::vector<std::pair<std::string, std::string>> report_metadata(const QueryPlan& plan,
                                                                 const Dataset& dataset);

/// Reduce step for one group: sorts the per-trial losses ascending by
/// (loss, trial order) and produces the rows the reducer spec asks for.
std::vector<ReportRow> reduce_group(const std::string& group_key, std::span<const double> losses,
                                    const ReducerSpec& spec);

/// Computes the dense per-(group, trial) loss vectors for an explicit layer
/// evaluation order. This is the core of both run_query and run_marginal;
/// exposed for the additivity tests.
TrialLossVector compute_trial_losses(const QueryPlan& plan, std::span<const LayerId> layer_order,
                                     const Dataset& dataset, const ExecConfig& cfg,
                                     PhaseTimings* timings = nullptr);

/// Full parallel query: map/combine over jobs and trials, then reduce.
/// Bit-identical to sequential_oracle for every worker count and job size.
LossReport run_query(const QueryPlan& plan, const Dataset& dataset, const ExecConfig& cfg,
                     PhaseTimings* timings = nullptr);

/// Ground-truth single-threaded evaluation: straightforward nested loops
/// over trials, events, layers and each layer's own ELTs (no combined-ELT
/// index, no jobs). Used as the correctness oracle for run_query.
LossReport sequential_oracle(const QueryPlan& plan, const Dataset& dataset);

/// One subset of the marginal candidates with its report and the
/// (subset - base) difference rows.
struct MarginalResult {
  std::vector<LayerId> subset;  // ascending candidate ids; empty = base
  LossReport report;
  LossReport difference;
};

/// Multi-marginal analysis: evaluates the base selection and each candidate
/// layer once, then assembles one report per candidate subset by per-trial
/// addition (financial terms are per-layer, so portfolio loss is additive
/// over layers). Subsets are ordered by candidate bitmask, so the first
/// result is the base itself.
std::vector<MarginalResult> run_marginal(const QueryPlan& plan, const Dataset& dataset,
                                         const ExecConfig& cfg);

}  // namespace aggrisk
