#include "aggrisk/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "aggrisk/errors.hpp"
#include "aggrisk/rng.hpp"

namespace aggrisk {

namespace {

// Substream indices of the master seed; one independent stream per table.
enum : std::uint64_t {
  kStreamCatalogue = 0,
  kStreamEltPool = 1,
  kStreamEelt = 2,
  kStreamLayers = 3,
  kStreamYet = 4,
};

const std::vector<std::string> kCobTokens = {"residential", "industrial", "energy", "agriculture"};
const std::vector<std::string> kLobTokens = {"commercial", "marine", "property", "engineering"};
const std::vector<std::string> kTobTokens = {"quota_share", "surplus", "excess_of_loss",
                                             "stop_loss"};

const std::string& pick(SplitMix64& rng, const std::vector<std::string>& tokens) {
  return tokens[rng.next_below(tokens.size())];
}

void check_tokens(const std::vector<std::string>& tokens, const char* what) {
  if (tokens.empty()) throw ConfigError(std::string(what) + " list must be nonempty");
  for (const std::string& t : tokens) {
    if (t.empty()) throw ConfigError(std::string(what) + " tokens must be nonempty");
    for (char c : t) {
      if (c == ',' || c == ';' || c == '\n' || c == '\r') {
        throw ConfigError(std::string(what) + " token '" + t + "' contains a separator character");
      }
    }
  }
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += tokens[i];
  }
  return out;
}

// Lower median of a sorted vector.
double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_trials < 1) throw ConfigError("num_trials must be >= 1");
  if (events_per_trial < 1) throw ConfigError("events_per_trial must be >= 1");
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (elts_per_layer < 1) throw ConfigError("elts_per_layer must be >= 1");
  if (catalogue_size < 1) throw ConfigError("catalogue_size must be >= 1");
  check_tokens(regions, "regions");
  check_tokens(perils, "perils");
}

std::string GeneratorConfig::manifest_text() const {
  std::ostringstream out;
  out << "seed=" << seed << "\n"
      << "num_trials=" << num_trials << "\n"
      << "events_per_trial=" << events_per_trial << "\n"
      << "num_layers=" << num_layers << "\n"
      << "elts_per_layer=" << elts_per_layer << "\n"
      << "catalogue_size=" << catalogue_size << "\n"
      << "regions=" << join(regions) << "\n"
      << "perils=" << join(perils) << "\n";
  return out.str();
}

Dataset generate_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.manifest = cfg.manifest_text();

  // Event catalogue.
  {
    SplitMix64 rng = substream(cfg.seed, kStreamCatalogue);
    ds.catalogue.reserve(cfg.catalogue_size);
    for (EventId id = 1; id <= cfg.catalogue_size; ++id) {
      ds.catalogue.push_back({id, pick(rng, cfg.regions), pick(rng, cfg.perils)});
    }
  }

  // ELT pool.
  const std::uint32_t num_elts = cfg.num_elts();
  {
    SplitMix64 rng = substream(cfg.seed, kStreamEltPool);
    ds.elt_pool.reserve(num_elts);
    for (EltId id = 1; id <= num_elts; ++id) {
      ds.elt_pool.push_back({id, pick(rng, cfg.regions), pick(rng, cfg.perils)});
    }
  }

  // Extended ELTs. Each covers a random fifth of the catalogue (at least one
  // event); loss magnitudes are log-uniform so every term level gets hit.
  {
    SplitMix64 rng = substream(cfg.seed, kStreamEelt);
    const std::uint32_t cover = std::max<std::uint32_t>(1, cfg.catalogue_size / 5);
    std::vector<EventId> pool(cfg.catalogue_size);
    for (EltId elt = 1; elt <= num_elts; ++elt) {
      std::iota(pool.begin(), pool.end(), EventId{1});
      for (std::uint32_t i = 0; i < cover; ++i) {
        const std::uint64_t j = i + rng.next_below(cfg.catalogue_size - i);
        std::swap(pool[i], pool[j]);
      }
      std::vector<EventId> covered(pool.begin(), pool.begin() + cover);
      std::sort(covered.begin(), covered.end());

      std::vector<EeltEntry> entries;
      entries.reserve(cover);
      for (EventId event : covered) {
        EeltEntry e;
        e.event_id = event;
        e.z_e = rng.next_unit();
        e.mean_loss = std::exp(std::log(1e3) + rng.next_unit() * std::log(1e4));
        e.max_loss = e.mean_loss * (2.0 + 3.0 * rng.next_unit());
        e.sigma_i = e.mean_loss * (0.1 + 0.4 * rng.next_unit());
        e.sigma_c = e.mean_loss * (0.1 + 0.4 * rng.next_unit());
        entries.push_back(e);
      }
      ds.eelts.emplace(elt, std::move(entries));
    }
  }

  // Layers. Each covers a disjoint block of elts_per_layer ELTs; the
  // occurrence retention sits at the median per-event layer loss so both
  // clip branches get exercised, and ten layers share one program.
  {
    SplitMix64 rng = substream(cfg.seed, kStreamLayers);
    ds.layers.reserve(cfg.num_layers);
    for (LayerId layer = 1; layer <= cfg.num_layers; ++layer) {
      LayerRecord rec;
      rec.layer_id = layer;
      rec.program_id = (layer - 1) / 10 + 1;
      rec.cob = pick(rng, kCobTokens);
      rec.lob = pick(rng, kLobTokens);
      rec.tob = pick(rng, kTobTokens);
      for (std::uint32_t k = 0; k < cfg.elts_per_layer; ++k) {
        rec.elt_ids.push_back((layer - 1) * cfg.elts_per_layer + k + 1);
      }

      std::map<EventId, double> event_loss;
      for (EltId elt : rec.elt_ids) {
        for (const EeltEntry& e : ds.eelts.at(elt)) {
          event_loss[e.event_id] += e.mean_loss;
        }
      }
      std::vector<double> losses;
      losses.reserve(event_loss.size());
      for (const auto& [event, loss] : event_loss) losses.push_back(loss);
      const double pivot = median_of(std::move(losses));

      rec.terms.occ_ret = pivot;
      rec.terms.occ_lim = pivot * (2.0 + 4.0 * rng.next_unit());
      rec.terms.agg_ret = pivot * (1.0 + 2.0 * rng.next_unit());
      rec.terms.agg_lim = pivot * (4.0 + 6.0 * rng.next_unit());
      rec.terms.share = 0.3 + 0.7 * rng.next_unit();
      ds.layers.push_back(std::move(rec));
    }
  }

  // Year event table: events_per_trial occurrences per trial, dense ordinal
  // time indexes.
  {
    SplitMix64 rng = substream(cfg.seed, kStreamYet);
    ds.yet.reserve(static_cast<std::size_t>(cfg.num_trials) * cfg.events_per_trial);
    for (TrialId trial = 1; trial <= cfg.num_trials; ++trial) {
      for (std::uint32_t t = 1; t <= cfg.events_per_trial; ++t) {
        YetRecord row;
        row.trial_id = trial;
        row.event_id = static_cast<EventId>(1 + rng.next_below(cfg.catalogue_size));
        row.time_index = t;
        row.z_pe = rng.next_unit();
        ds.yet.push_back(row);
      }
    }
  }

  ds.rebuild_index();
  return ds;
}

std::vector<YetRecord> build_step_yet(const StepSpec& spec, std::uint64_t seed) {
  if (spec.weighted_events.empty()) {
    throw ConfigError("STEP event list must be nonempty");
  }
  if (spec.num_trials < 1) throw ConfigError("STEP num_trials must be >= 1");
  for (const StepEvent& e : spec.weighted_events) {
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw ConfigError("STEP weight of event " + std::to_string(e.event_id) +
                        " must be positive and finite");
    }
  }

  std::vector<double> cumulative;
  cumulative.reserve(spec.weighted_events.size());
  double total = 0.0;
  for (const StepEvent& e : spec.weighted_events) {
    total += e.weight;
    cumulative.push_back(total);
  }

  SplitMix64 rng(seed);
  std::vector<YetRecord> yet;
  yet.reserve(spec.num_trials);
  for (TrialId trial = 1; trial <= spec.num_trials; ++trial) {
    const double threshold = rng.next_unit() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), threshold);
    const std::size_t idx =
        std::min<std::size_t>(it - cumulative.begin(), spec.weighted_events.size() - 1);
    YetRecord row;
    row.trial_id = trial;
    row.event_id = spec.weighted_events[idx].event_id;
    row.time_index = 1;
    row.z_pe = rng.next_unit();
    yet.push_back(row);
  }
  return yet;
}

}  // namespace aggrisk
