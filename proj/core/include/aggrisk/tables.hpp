#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aggrisk {

using TrialId = std::uint32_t;
using EventId = std::uint32_t;
using LayerId = std::uint32_t;
using EltId = std::uint32_t;

/// One simulated event occurrence inside a trial.
struct YetRecord {
  TrialId trial_id = 0;
  EventId event_id = 0;
  std::uint32_t time_index = 0;  // ordinal position within the trial's year
  double z_pe = 0.0;             // program-event uniform draw, in [0,1)
};

/// Occurrence and aggregate financial terms of one risk-transfer layer.
struct LayerTerms {
  double occ_ret = 0.0;
  double occ_lim = 0.0;
  double agg_ret = 0.0;
  double agg_lim = 0.0;
  double share = 1.0;  // participation fraction, in (0,1]
};

/// A risk-transfer contract: business classifiers plus covered ELT ids.
struct LayerRecord {
  LayerId layer_id = 0;
  std::uint32_t program_id = 0;
  std::string cob;
  std::string lob;
  std::string tob;
  std::vector<EltId> elt_ids;  // nonempty, no duplicates
  LayerTerms terms;
};

/// Pool entry associating a region and peril with an event loss table.
struct EltMeta {
  EltId elt_id = 0;
  std::string region;
  std::string peril;
};

/// Per-event loss parameters of one extended event loss table.
struct EeltEntry {
  EventId event_id = 0;
  double z_e = 0.0;  // event uniform draw, shared across programs, in [0,1)
  double mean_loss = 0.0;
  double sigma_i = 0.0;
  double sigma_c = 0.0;
  double max_loss = 0.0;  // mean_loss <= max_loss
};

/// Event catalogue row: region and peril of a simulated event.
struct EventCatalogRecord {
  EventId event_id = 0;
  std::string region;
  std::string peril;
};

/// Intermediate year-loss-table entry emitted by the mapper: the portfolio
/// loss of one event occurrence after financial terms.
struct YltEntry {
  TrialId trial_id = 0;
  EventId event_id = 0;
  std::uint32_t time_index = 0;
  double loss = 0.0;
};

/// Per-(group, trial) aggregate produced by the combiner.
struct GroupedLoss {
  std::string group_key;
  TrialId trial_id = 0;
  double loss = 0.0;
};

/// In-memory event-indexed union of a set of ELTs. One lookup per event
/// occurrence returns every selected ELT that covers the event. Immutable
/// after construction and safe to share read-only across workers.
class CombinedElt {
 public:
  struct Row {
    EltId elt_id;
    EeltEntry entry;
  };

  CombinedElt() = default;

  /// Rows for an event, sorted ascending by elt_id; nullptr when no
  /// selected ELT covers the event.
  const std::vector<Row>* find(EventId event_id) const {
    auto it = index_.find(event_id);
    return it == index_.end() ? nullptr : &it->second;
  }

  std::size_t event_count() const { return index_.size(); }

  const std::unordered_map<EventId, std::vector<Row>>& index() const { return index_; }

 private:
  friend CombinedElt build_combined_elt(
      std::span<const std::pair<EltId, std::vector<EeltEntry>>> eelts);

  std::unordered_map<EventId, std::vector<Row>> index_;
};

/// Builds the combined ELT from (elt_id, entries) pairs.
/// Throws DataError(InvariantViolation) on a duplicate (event_id, elt_id).
CombinedElt build_combined_elt(std::span<const std::pair<EltId, std::vector<EeltEntry>>> eelts);

/// One portfolio validation finding.
struct Violation {
  std::string code;     // "dangling_elt", "duplicate_layer", "empty_elt_list", ...
  std::string message;  // human-readable, names the offending layer/id
};

/// Report-based portfolio validation: empty result iff well-formed.
std::vector<Violation> validate_portfolio(std::span<const LayerRecord> layers,
                                          std::span<const EltMeta> pool);

}  // namespace aggrisk
