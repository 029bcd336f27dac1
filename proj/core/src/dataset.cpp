#include "aggrisk/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "aggrisk/rng.hpp"

namespace aggrisk {

void Dataset::rebuild_index() {
  trials.clear();
  layer_by_id.clear();
  catalogue_by_event.clear();

  // Trials ordered by id; rows keep file order (time ascending by invariant).
  std::map<TrialId, std::vector<std::uint32_t>> by_trial;
  for (std::uint32_t i = 0; i < yet.size(); ++i) {
    by_trial[yet[i].trial_id].push_back(i);
  }
  trials.reserve(by_trial.size());
  for (auto& [id, rows] : by_trial) {
    trials.push_back({id, std::move(rows)});
  }

  for (std::uint32_t i = 0; i < layers.size(); ++i) {
    layer_by_id.emplace(layers[i].layer_id, i);
  }
  for (std::uint32_t i = 0; i < catalogue.size(); ++i) {
    catalogue_by_event.emplace(catalogue[i].event_id, i);
  }
}

const LayerRecord* Dataset::find_layer(LayerId id) const {
  auto it = layer_by_id.find(id);
  return it == layer_by_id.end() ? nullptr : &layers[it->second];
}

const EventCatalogRecord* Dataset::find_event(EventId id) const {
  auto it = catalogue_by_event.find(id);
  return it == catalogue_by_event.end() ? nullptr : &catalogue[it->second];
}

std::uint64_t Dataset::manifest_hash() const { return fnv1a64(manifest.data(), manifest.size()); }

std::string Dataset::manifest_hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(manifest_hash()));
  return buf;
}

}  // namespace aggrisk
