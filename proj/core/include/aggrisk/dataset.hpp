#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "aggrisk/tables.hpp"

namespace aggrisk {

/// Row indices of one trial in YET file order (time_index ascending by the
/// table invariant).
struct TrialRows {
  TrialId trial_id = 0;
  std::vector<std::uint32_t> rows;
};

/// All tables of one dataset plus derived lookup indexes. Immutable once
/// built; shared read-only by concurrent workers.
struct Dataset {
  std::vector<YetRecord> yet;                       // file order
  std::vector<LayerRecord> layers;                  // file order
  std::vector<EltMeta> elt_pool;                    // file order
  std::vector<EventCatalogRecord> catalogue;        // file order
  std::unordered_map<EltId, std::vector<EeltEntry>> eelts;
  std::string manifest;                             // manifest.txt content

  // Derived; call rebuild_index() after mutating the tables above.
  std::vector<TrialRows> trials;                    // ascending trial_id
  std::unordered_map<LayerId, std::uint32_t> layer_by_id;
  std::unordered_map<EventId, std::uint32_t> catalogue_by_event;

  void rebuild_index();

  std::size_t num_trials() const { return trials.size(); }
  const LayerRecord* find_layer(LayerId id) const;
  const EventCatalogRecord* find_event(EventId id) const;

  /// FNV-1a hash of the manifest, printed in report metadata.
  std::uint64_t manifest_hash() const;
  std::string manifest_hash_hex() const;
};

}  // namespace aggrisk
