#include "aggrisk/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include "aggrisk/dataset_io.hpp"
#include "aggrisk/errors.hpp"
#include "aggrisk/financial.hpp"
#include "aggrisk/text.hpp"

namespace aggrisk {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_bucket(int bucket) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", bucket);
  return buf;
}

[[noreturn]] void throw_missing_events(std::set<EventId> missing) {
  std::string msg = "events referenced by the YET are missing from the catalogue:";
  std::size_t listed = 0;
  for (EventId id : missing) {
    if (listed == 20) {
      msg += " ... (" + std::to_string(missing.size() - listed) + " more)";
      break;
    }
    msg += ' ' + std::to_string(id);
    ++listed;
  }
  throw AnnotationError(msg, {missing.begin(), missing.end()});
}

// Resolves every YET row to a dense group id. Group ids follow the
// ascending order of the canonical key strings, so reports are ordered the
// same regardless of how groups are discovered.
class GroupResolver {
 public:
  GroupResolver(const QueryPlan& plan, const Dataset& ds) {
    if (plan.grouping.empty()) {
      keys_ = {"TOTAL"};
      single_ = true;
      return;
    }
    const auto annotations = apply_event_filter(plan.query, ds.catalogue);
    const bool need_attrs = plan.need_region || plan.need_peril;

    // Discovery pass: provisional ids in first-seen order.
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::uint32_t> provisional(ds.yet.size(), 0);
    std::set<EventId> missing;
    for (const TrialRows& trial : ds.trials) {
      const std::size_t m = trial.rows.size();
      for (std::uint32_t row : trial.rows) {
        const YetRecord& ev = ds.yet[row];
        const EventAttrs* attrs = nullptr;
        if (need_attrs) {
          const auto it = annotations.find(ev.event_id);
          if (it == annotations.end()) {
            missing.insert(ev.event_id);
            continue;
          }
          attrs = &it->second;
        }
        const std::string key = make_group_key(plan.grouping, attrs, ev.time_index, m);
        const auto [it, fresh] = ids.try_emplace(key, static_cast<std::uint32_t>(ids.size()));
        (void)fresh;
        provisional[row] = it->second;
      }
    }
    if (!missing.empty()) throw_missing_events(std::move(missing));

    // Renumber so group ids follow ascending key order.
    keys_.resize(ids.size());
    for (const auto& [key, id] : ids) keys_[id] = key;
    std::vector<std::uint32_t> order(ids.size());
    std::vector<std::string> sorted_keys(keys_);
    std::sort(sorted_keys.begin(), sorted_keys.end());
    for (const auto& [key, id] : ids) {
      order[id] = static_cast<std::uint32_t>(
          std::lower_bound(sorted_keys.begin(), sorted_keys.end(), key) - sorted_keys.begin());
    }
    keys_ = std::move(sorted_keys);
    row_gid_.resize(ds.yet.size());
    for (std::size_t row = 0; row < row_gid_.size(); ++row) {
      row_gid_[row] = order[provisional[row]];
    }
  }

  std::uint32_t group_count() const { return static_cast<std::uint32_t>(keys_.size()); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::uint32_t gid(std::size_t yet_row) const { return single_ ? 0 : row_gid_[yet_row]; }

 private:
  bool single_ = false;
  std::vector<std::string> keys_;
  std::vector<std::uint32_t> row_gid_;
};

struct JobLayer {
  const LayerRecord* rec = nullptr;
  std::vector<EltId> elts;  // covered by the layer and selected by the plan, ascending
};

// All shared read-only state one job needs: layer slice, its combined ELT,
// and the elt -> covering-layer-ranks index used to scatter event losses.
struct JobContext {
  std::vector<JobLayer> layers;
  CombinedElt celt;
  std::unordered_map<EltId, std::vector<std::uint32_t>> owner_ranks;
};

JobContext build_job_context(const Job& job, const QueryPlan& plan, const Dataset& ds) {
  JobContext ctx;
  ctx.layers.reserve(job.layer_ids.size());
  for (LayerId id : job.layer_ids) {
    const LayerRecord* rec = ds.find_layer(id);
    if (rec == nullptr) {
      throw DataError(DataError::Kind::InvariantViolation, "", 0,
                      "selected layer " + std::to_string(id) + " not present in the dataset");
    }
    JobLayer layer;
    layer.rec = rec;
    layer.elts.assign(rec->elt_ids.begin(), rec->elt_ids.end());
    std::sort(layer.elts.begin(), layer.elts.end());
    std::erase_if(layer.elts, [&plan](EltId e) {
      return !std::binary_search(plan.elt_ids.begin(), plan.elt_ids.end(), e);
    });
    ctx.layers.push_back(std::move(layer));
  }

  for (std::uint32_t rank = 0; rank < ctx.layers.size(); ++rank) {
    for (EltId elt : ctx.layers[rank].elts) {
      ctx.owner_ranks[elt].push_back(rank);
    }
  }

  std::vector<std::pair<EltId, std::vector<EeltEntry>>> eelts;
  eelts.reserve(job.elt_ids.size());
  for (EltId elt : job.elt_ids) {
    const auto it = ds.eelts.find(elt);
    if (it == ds.eelts.end()) {
      throw DataError(DataError::Kind::InvariantViolation, "", 0,
                      "selected elt " + std::to_string(elt) + " has no loaded event loss table");
    }
    eelts.emplace_back(elt, it->second);
  }
  ctx.celt = build_combined_elt(eelts);
  return ctx;
}

// Per-worker mutable state, reused across trials.
struct TrialScratch {
  std::vector<double> layer_loss;       // l_L of the current event, per rank
  std::vector<AggregateState> agg;      // per rank, reset each trial
  std::vector<double> acc;              // group-major per-layer sums, reset each trial
};

// The fused mapper+combiner for one trial of one job. Walks events in time
// order, prices every layer, and accumulates per-(group, layer) payout sums.
// At trial end the sums are folded into the global per-(group, trial) totals
// ascending by layer rank: together with the ascending job merge this fixes
// one global layer fold order, which is what makes the result independent of
// job size and worker count down to the last bit.
void process_trial(const Dataset& ds, const TrialRows& trial, std::size_t trial_idx,
                   const JobContext& job, bool secondary_uncertainty,
                   const GroupResolver& resolver, std::vector<std::vector<double>>& totals,
                   TrialScratch& scratch, std::vector<double>* yelt_losses) {
  const std::size_t k = job.layers.size();
  const std::uint32_t groups = resolver.group_count();

  scratch.layer_loss.assign(k, 0.0);
  scratch.agg.assign(k, AggregateState{});
  scratch.acc.assign(static_cast<std::size_t>(groups) * k, 0.0);

  for (std::uint32_t row : trial.rows) {
    const YetRecord& ev = ds.yet[row];

    std::fill(scratch.layer_loss.begin(), scratch.layer_loss.end(), 0.0);
    if (const auto* celt_rows = job.celt.find(ev.event_id)) {
      // Entries are ascending by elt_id, so each layer's loss accumulates
      // its covered ELTs in ascending elt order.
      for (const CombinedElt::Row& r : *celt_rows) {
        const auto owners = job.owner_ranks.find(r.elt_id);
        if (owners == job.owner_ranks.end()) continue;
        const double loss = sample_event_loss(r.entry, ev.z_pe, secondary_uncertainty);
        for (std::uint32_t rank : owners->second) scratch.layer_loss[rank] += loss;
      }
    }

    const std::uint32_t gid = resolver.gid(row);
    double* acc_row = scratch.acc.data() + static_cast<std::size_t>(gid) * k;
    double event_pf = 0.0;
    for (std::size_t rank = 0; rank < k; ++rank) {
      const LayerTerms& terms = job.layers[rank].rec->terms;
      const double occ = apply_occurrence_terms(scratch.layer_loss[rank], terms);
      const auto [next, increment] = apply_aggregate_terms(scratch.agg[rank], occ, terms);
      scratch.agg[rank] = next;
      acc_row[rank] += increment;
      event_pf += increment;
    }
    if (yelt_losses != nullptr) (*yelt_losses)[row] += event_pf;
  }

  for (std::uint32_t g = 0; g < groups; ++g) {
    double& total = totals[g][trial_idx];
    const double* acc_row = scratch.acc.data() + static_cast<std::size_t>(g) * k;
    for (std::size_t rank = 0; rank < k; ++rank) total += acc_row[rank];
  }
}

struct WorkerFailure {
  std::size_t block = 0;
  std::string message;
};

// Contiguous trial blocks, one per worker; trailing blocks may be empty.
std::vector<std::pair<std::size_t, std::size_t>> trial_blocks(std::size_t trials,
                                                              unsigned workers) {
  const std::size_t w = std::max(1u, workers);
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  const std::size_t base = trials / w;
  const std::size_t extra = trials % w;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    blocks.emplace_back(lo, lo + size);
    lo += size;
  }
  return blocks;
}

LossReport reduce_all(const TrialLossVector& vec, const QueryPlan& plan, const Dataset& ds,
                      PhaseTimings* timings) {
  const auto start = Clock::now();
  std::vector<ReportRow> rows;
  for (std::size_t g = 0; g < vec.group_keys.size(); ++g) {
    auto group_rows = reduce_group(vec.group_keys[g], vec.losses[g], plan.reducer);
    rows.insert(rows.end(), group_rows.begin(), group_rows.end());
  }
  LossReport report = assemble_report(std::move(rows), report_metadata(plan, ds));
  if (timings != nullptr) timings->reduce = seconds_since(start);
  return report;
}

}  // namespace

std::string make_group_key(const GroupBySpec& grouping, const EventAttrs* attrs,
                           std::uint32_t time_index, std::size_t trial_events) {
  if (grouping.empty()) return "TOTAL";
  std::string key;
  auto add = [&key](const std::string& part) {
    if (!key.empty()) key += '|';
    key += part;
  };
  if (grouping.by_region) add("region=" + attrs->region);
  if (grouping.by_peril) add("peril=" + attrs->peril);
  if (grouping.period) {
    const auto k = static_cast<std::uint64_t>(period_buckets(*grouping.period));
    const std::uint64_t m = trial_events;
    const auto bucket = static_cast<int>((time_index * k + m - 1) / m);
    add(std::string(period_name(*grouping.period)) + "=" + format_bucket(bucket));
  }
  return key;
}

std::vector<std::pair<std::string, std::string>> report_metadata(const QueryPlan& plan,
                                                                 const Dataset& dataset) {
  return {
      {"query", plan.query_text},
      {"dataset_hash", dataset.manifest_hash_hex()},
      {"num_trials", std::to_string(dataset.num_trials())},
      {"var_convention",
       "VaR(p) is the ceil(p*N)-th smallest loss; query VAR(x)/TVAR(x) take x as the tail "
       "probability (confidence = 1-x)"},
      {"variance_convention", "unbiased (N-1 divisor); a single trial reports variance 0"},
  };
}

std::vector<Job> split_jobs(std::span<const LayerId> selected_layers,
                            std::span<const LayerRecord> layers,
                            std::span<const EltId> selected_elts, std::size_t job_size) {
  if (job_size < 1) throw ConfigError("job_size must be >= 1");

  std::unordered_map<LayerId, const LayerRecord*> by_id;
  for (const LayerRecord& rec : layers) by_id.emplace(rec.layer_id, &rec);

  std::vector<Job> jobs;
  std::uint32_t job_id = 0;
  for (std::size_t offset = 0; offset < selected_layers.size(); offset += job_size) {
    const std::size_t count = std::min(job_size, selected_layers.size() - offset);
    Job job;
    job.job_id = job_id++;
    job.layer_ids.assign(selected_layers.begin() + offset,
                         selected_layers.begin() + offset + count);

    std::set<EltId> elts;
    for (LayerId id : job.layer_ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      for (EltId elt : it->second->elt_ids) {
        if (std::binary_search(selected_elts.begin(), selected_elts.end(), elt)) {
          elts.insert(elt);
        }
      }
    }
    job.elt_ids.assign(elts.begin(), elts.end());
    jobs.push_back(std::move(job));
  }
  return jobs;
}

std::vector<YltEntry> map_trial(std::span<const YetRecord> trial, const CombinedElt& celt,
                                std::span<const LayerRecord> layers,
                                std::span<const EltId> selected_elts,
                                bool secondary_uncertainty) {
  // Evaluation order: ascending layer_id, each layer's ELTs ascending.
  std::vector<const LayerRecord*> ordered;
  ordered.reserve(layers.size());
  for (const LayerRecord& rec : layers) ordered.push_back(&rec);
  std::sort(ordered.begin(), ordered.end(),
            [](const LayerRecord* a, const LayerRecord* b) { return a->layer_id < b->layer_id; });

  std::vector<EltId> sorted_selection(selected_elts.begin(), selected_elts.end());
  std::sort(sorted_selection.begin(), sorted_selection.end());

  std::unordered_map<EltId, std::vector<std::uint32_t>> owner_ranks;
  for (std::uint32_t rank = 0; rank < ordered.size(); ++rank) {
    std::vector<EltId> elts(ordered[rank]->elt_ids.begin(), ordered[rank]->elt_ids.end());
    std::sort(elts.begin(), elts.end());
    for (EltId elt : elts) {
      if (std::binary_search(sorted_selection.begin(), sorted_selection.end(), elt)) {
        owner_ranks[elt].push_back(rank);
      }
    }
  }

  std::vector<double> layer_loss(ordered.size(), 0.0);
  std::vector<AggregateState> agg(ordered.size());
  std::vector<YltEntry> out;
  out.reserve(trial.size());

  for (const YetRecord& ev : trial) {
    std::fill(layer_loss.begin(), layer_loss.end(), 0.0);
    if (const auto* rows = celt.find(ev.event_id)) {
      for (const CombinedElt::Row& r : *rows) {
        const auto owners = owner_ranks.find(r.elt_id);
        if (owners == owner_ranks.end()) continue;
        const double loss = sample_event_loss(r.entry, ev.z_pe, secondary_uncertainty);
        for (std::uint32_t rank : owners->second) layer_loss[rank] += loss;
      }
    }
    double event_pf = 0.0;
    for (std::size_t rank = 0; rank < ordered.size(); ++rank) {
      const LayerTerms& terms = ordered[rank]->terms;
      const double occ = apply_occurrence_terms(layer_loss[rank], terms);
      const auto [next, increment] = apply_aggregate_terms(agg[rank], occ, terms);
      agg[rank] = next;
      event_pf += increment;
    }
    out.push_back({ev.trial_id, ev.event_id, ev.time_index, event_pf});
  }
  return out;
}

std::vector<GroupedLoss> combine_trial(std::span<const YltEntry> entries,
                                       const std::unordered_map<EventId, EventAttrs>& annotations,
                                       const GroupBySpec& grouping) {
  std::vector<GroupedLoss> out;
  if (entries.empty()) return out;

  const std::size_t m = entries.size();
  const bool need_attrs = grouping.by_region || grouping.by_peril;

  std::map<std::string, double> sums;  // key -> loss, summed in time order
  std::set<EventId> missing;
  for (const YltEntry& e : entries) {
    const EventAttrs* attrs = nullptr;
    if (need_attrs) {
      const auto it = annotations.find(e.event_id);
      if (it == annotations.end()) {
        missing.insert(e.event_id);
        continue;
      }
      attrs = &it->second;
    }
    sums[make_group_key(grouping, attrs, e.time_index, m)] += e.loss;
  }
  if (!missing.empty()) throw_missing_events(std::move(missing));

  out.reserve(sums.size());
  for (const auto& [key, loss] : sums) {
    out.push_back({key, entries.front().trial_id, loss});
  }
  return out;
}

std::vector<ReportRow> reduce_group(const std::string& group_key, std::span<const double> losses,
                                    const ReducerSpec& spec) {
  if (losses.empty()) throw ParamError("reduce_group requires a nonempty loss list");

  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<ReportRow> rows;
  switch (spec.kind) {
    case StatKind::Ep: {
      for (const auto& [threshold, prob] : ep_curve(sorted, spec.ep_thresholds)) {
        rows.push_back({group_key, "ep", threshold, prob});
      }
      break;
    }
    case StatKind::Var:
      rows.push_back({group_key, "var", spec.confidence, value_at_risk(sorted, spec.confidence)});
      break;
    case StatKind::Tvar:
      rows.push_back(
          {group_key, "tvar", spec.confidence, tail_value_at_risk(sorted, spec.confidence)});
      break;
    case StatKind::Mean: {
      double sum = 0.0;
      for (double v : losses) sum += v;  // ascending trial order
      rows.push_back({group_key, "mean", std::nullopt, sum / static_cast<double>(losses.size())});
      break;
    }
    case StatKind::Stats: {
      const SummaryStats s = summary_stats(losses);
      rows.push_back({group_key, "mean", std::nullopt, s.mean});
      rows.push_back({group_key, "variance", std::nullopt, s.variance});
      rows.push_back({group_key, "min", std::nullopt, s.min});
      rows.push_back({group_key, "max", std::nullopt, s.max});
      rows.push_back({group_key, "quantile", 0.5, s.q50});
      rows.push_back({group_key, "quantile", 0.9, s.q90});
      rows.push_back({group_key, "quantile", 0.99, s.q99});
      break;
    }
    case StatKind::Distribution: {
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        rows.push_back({group_key, "distribution", static_cast<double>(i + 1), sorted[i]});
      }
      break;
    }
  }
  return rows;
}

TrialLossVector compute_trial_losses(const QueryPlan& plan, std::span<const LayerId> layer_order,
                                     const Dataset& dataset, const ExecConfig& cfg,
                                     PhaseTimings* timings) {
  const auto setup_start = Clock::now();
  if (dataset.num_trials() == 0) {
    throw DataError(DataError::Kind::InvariantViolation, "yet.csv", 0,
                    "the year event table contains no trials");
  }

  const GroupResolver resolver(plan, dataset);
  const std::vector<Job> jobs =
      split_jobs(layer_order, dataset.layers, plan.elt_ids, cfg.job_size);

  TrialLossVector vec;
  vec.group_keys = resolver.keys();
  vec.trial_ids.reserve(dataset.num_trials());
  for (const TrialRows& t : dataset.trials) vec.trial_ids.push_back(t.trial_id);
  vec.losses.assign(resolver.group_count(), std::vector<double>(dataset.num_trials(), 0.0));

  std::vector<double> yelt_losses;
  const bool want_yelt = !cfg.dump_yelt_path.empty();
  if (want_yelt) yelt_losses.assign(dataset.yet.size(), 0.0);

  if (timings != nullptr) timings->setup = seconds_since(setup_start);
  const auto map_start = Clock::now();

  // Jobs run one after another in ascending id order; trial parallelism
  // lives inside a job. Workers own disjoint trial blocks, so every
  // totals[g][t] cell is written by exactly one thread per job.
  for (const Job& job : jobs) {
    JobContext ctx;
    try {
      ctx = build_job_context(job, plan, dataset);
    } catch (const Error& e) {
      throw DataError(DataError::Kind::InvariantViolation, "", 0,
                      "job " + std::to_string(job.job_id) + ": " + e.what());
    }

    const auto blocks = trial_blocks(dataset.num_trials(), cfg.workers);
    std::vector<std::optional<WorkerFailure>> failures(blocks.size());
    std::vector<std::thread> threads;
    threads.reserve(blocks.size());

    for (std::size_t b = 0; b < blocks.size(); ++b) {
      threads.emplace_back([&, b] {
        TrialScratch scratch;
        const auto [lo, hi] = blocks[b];
        for (std::size_t t = lo; t < hi; ++t) {
          try {
            process_trial(dataset, dataset.trials[t], t, ctx, plan.query.secondary_uncertainty,
                          resolver, vec.losses, scratch,
                          want_yelt ? &yelt_losses : nullptr);
          } catch (const std::exception& e) {
            failures[b] = WorkerFailure{
                b, "job " + std::to_string(job.job_id) + ", trial " +
                       std::to_string(dataset.trials[t].trial_id) + ": " + e.what()};
            return;
          }
        }
      });
    }
    for (std::thread& th : threads) th.join();
    for (const auto& failure : failures) {
      if (failure) throw Error(failure->message);
    }
  }

  if (timings != nullptr) timings->map_combine = seconds_since(map_start);

  if (want_yelt) {
    std::vector<YltEntry> entries;
    entries.reserve(dataset.yet.size());
    for (const TrialRows& trial : dataset.trials) {
      for (std::uint32_t row : trial.rows) {
        const YetRecord& ev = dataset.yet[row];
        entries.push_back({ev.trial_id, ev.event_id, ev.time_index, yelt_losses[row]});
      }
    }
    write_yelt_csv(cfg.dump_yelt_path, entries);
  }
  return vec;
}

LossReport run_query(const QueryPlan& plan, const Dataset& dataset, const ExecConfig& cfg,
                     PhaseTimings* timings) {
  const TrialLossVector vec = compute_trial_losses(plan, plan.layer_ids, dataset, cfg, timings);
  return reduce_all(vec, plan, dataset, timings);
}

std::vector<MarginalResult> run_marginal(const QueryPlan& plan, const Dataset& dataset,
                                         const ExecConfig& cfg) {
  std::vector<LayerId> candidates = plan.query.marginal;
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() > 10) {
    throw ConfigError("at most 10 candidate layers are supported");
  }
  for (LayerId c : candidates) {
    if (std::binary_search(plan.layer_ids.begin(), plan.layer_ids.end(), c)) {
      throw ConfigError("candidate layer " + std::to_string(c) + " overlaps the base selection");
    }
  }

  // The base plan drops the marginal clause so the empty subset reproduces a
  // plain run of the base query byte for byte.
  QueryPlan base_plan = plan;
  base_plan.query.marginal.clear();
  base_plan.query_text = print_query(base_plan.query);

  const TrialLossVector base =
      compute_trial_losses(base_plan, base_plan.layer_ids, dataset, cfg);

  // One evaluation per candidate layer; per-layer financial terms make the
  // portfolio loss additive over layers, so subsets are assembled by
  // per-trial addition in ascending candidate order.
  std::vector<TrialLossVector> per_candidate;
  per_candidate.reserve(candidates.size());
  for (LayerId c : candidates) {
    QueryPlan cand_plan = base_plan;
    cand_plan.layer_ids = {c};
    const LayerId one[] = {c};
    cand_plan.elt_ids =
        apply_elt_filter(base_plan.query, one, dataset.layers, dataset.elt_pool);
    per_candidate.push_back(compute_trial_losses(cand_plan, cand_plan.layer_ids, dataset, cfg));
  }

  const LossReport base_report = reduce_all(base, base_plan, dataset, nullptr);

  std::vector<MarginalResult> results;
  const std::size_t subset_count = std::size_t{1} << candidates.size();
  results.reserve(subset_count);

  for (std::size_t mask = 0; mask < subset_count; ++mask) {
    MarginalResult result;
    TrialLossVector combined = base;
    for (std::size_t bit = 0; bit < candidates.size(); ++bit) {
      if (!(mask & (std::size_t{1} << bit))) continue;
      result.subset.push_back(candidates[bit]);
      for (std::size_t g = 0; g < combined.losses.size(); ++g) {
        const auto& add = per_candidate[bit].losses[g];
        auto& into = combined.losses[g];
        for (std::size_t t = 0; t < into.size(); ++t) into[t] += add[t];
      }
    }

    result.report = reduce_all(combined, base_plan, dataset, nullptr);

    result.difference = result.report;
    std::string subset_tag;
    for (std::size_t i = 0; i < result.subset.size(); ++i) {
      if (i) subset_tag += ',';
      subset_tag += std::to_string(result.subset[i]);
    }
    result.difference.metadata.emplace_back("subset", subset_tag);
    for (std::size_t i = 0; i < result.difference.rows.size(); ++i) {
      result.difference.rows[i].value -= base_report.rows[i].value;
    }
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace aggrisk
