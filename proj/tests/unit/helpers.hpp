#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aggrisk/dataset.hpp"
#include "aggrisk/generator.hpp"
#include "aggrisk/tables.hpp"

namespace testutil {

inline aggrisk::LayerTerms pass_through_terms() {
  aggrisk::LayerTerms t;
  t.occ_ret = 0.0;
  t.occ_lim = 1e18;
  t.agg_ret = 0.0;
  t.agg_lim = 1e18;
  t.share = 1.0;
  return t;
}

inline aggrisk::GeneratorConfig small_config(std::uint64_t seed, std::uint32_t trials = 50,
                                             std::uint32_t events = 10,
                                             std::uint32_t layers = 6,
                                             std::uint32_t elts_per_layer = 2,
                                             std::uint32_t catalogue = 20) {
  aggrisk::GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.num_trials = trials;
  cfg.events_per_trial = events;
  cfg.num_layers = layers;
  cfg.elts_per_layer = elts_per_layer;
  cfg.catalogue_size = catalogue;
  return cfg;
}

/// Fresh scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("aggrisk_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace testutil
