#include "aggrisk/tables.hpp"

#include <algorithm>
#include <unordered_set>

#include "aggrisk/errors.hpp"

namespace aggrisk {

CombinedElt build_combined_elt(std::span<const std::pair<EltId, std::vector<EeltEntry>>> eelts) {
  CombinedElt celt;
  for (const auto& [elt_id, entries] : eelts) {
    for (const EeltEntry& entry : entries) {
      auto& rows = celt.index_[entry.event_id];
      for (const CombinedElt::Row& row : rows) {
        if (row.elt_id == elt_id) {
          throw DataError(DataError::Kind::InvariantViolation, "", 0,
                          "duplicate (event_id=" + std::to_string(entry.event_id) +
                              ", elt_id=" + std::to_string(elt_id) + ") in combined ELT input");
        }
      }
      rows.push_back({elt_id, entry});
    }
  }
  // Deterministic iteration within an event regardless of input order.
  for (auto& [event_id, rows] : celt.index_) {
    std::sort(rows.begin(), rows.end(),
              [](const CombinedElt::Row& a, const CombinedElt::Row& b) { return a.elt_id < b.elt_id; });
  }
  return celt;
}

std::vector<Violation> validate_portfolio(std::span<const LayerRecord> layers,
                                          std::span<const EltMeta> pool) {
  std::vector<Violation> out;

  std::unordered_set<EltId> pool_ids;
  for (const EltMeta& meta : pool) {
    if (!pool_ids.insert(meta.elt_id).second) {
      out.push_back({"duplicate_pool_elt",
                     "elt_id " + std::to_string(meta.elt_id) + " appears twice in the ELT pool"});
    }
  }

  std::unordered_set<LayerId> seen_layers;
  for (const LayerRecord& layer : layers) {
    const std::string tag = "layer " + std::to_string(layer.layer_id);
    if (!seen_layers.insert(layer.layer_id).second) {
      out.push_back({"duplicate_layer", tag + ": duplicate layer_id"});
    }
    if (layer.elt_ids.empty()) {
      out.push_back({"empty_elt_list", tag + ": covers no ELTs"});
    }
    std::unordered_set<EltId> seen_elts;
    for (EltId elt : layer.elt_ids) {
      if (!seen_elts.insert(elt).second) {
        out.push_back({"duplicate_elt_ref",
                       tag + ": elt_id " + std::to_string(elt) + " listed twice"});
      }
      if (!pool_ids.contains(elt)) {
        out.push_back({"dangling_elt",
                       tag + ": elt_id " + std::to_string(elt) + " not in the ELT pool"});
      }
    }
  }
  return out;
}

}  // namespace aggrisk
