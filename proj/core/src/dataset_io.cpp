#include "aggrisk/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "aggrisk/errors.hpp"
#include "aggrisk/tables.hpp"
#include "aggrisk/text.hpp"

namespace fs = std::filesystem;

namespace aggrisk {

namespace {

constexpr const char* kYetHeader = "trial_id,event_id,time_index,z_pe";
constexpr const char* kLayersHeader =
    "layer_id,program_id,cob,lob,tob,elt_ids,occ_ret,occ_lim,agg_ret,agg_lim,share";
constexpr const char* kEltPoolHeader = "elt_id,region,peril";
constexpr const char* kEeltHeader = "event_id,z_e,mean_loss,sigma_i,sigma_c,max_loss";
constexpr const char* kEventsHeader = "event_id,region,peril";

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(DataError::Kind::MissingFile, path.string(), 0, "cannot open for writing");
  }
  out << content;
  if (!out) {
    throw DataError(DataError::Kind::MissingFile, path.string(), 0, "write failed");
  }
}

/// Line-oriented CSV reader with mandatory header and location-carrying
/// errors.
class CsvReader {
 public:
  CsvReader(const fs::path& path, const char* header) : name_(path.filename().string()) {
    in_.open(path, std::ios::binary);
    if (!in_) {
      throw DataError(DataError::Kind::MissingFile, name_, 0, "file not found");
    }
    std::string first;
    if (!std::getline(in_, first)) {
      fail_malformed(1, "missing header row");
    }
    strip_cr(first);
    if (first != header) {
      fail_malformed(1, "unexpected header, want '" + std::string(header) + "'");
    }
    line_no_ = 1;
  }

  /// Next data row split on ','; false at EOF. Empty trailing line is EOF.
  bool next(std::vector<std::string_view>& fields, std::size_t expect) {
    if (!std::getline(in_, line_)) return false;
    ++line_no_;
    strip_cr(line_);
    if (line_.empty() && in_.peek() == std::ifstream::traits_type::eof()) return false;
    fields = split(line_, ',');
    if (fields.size() != expect) {
      fail_malformed(line_no_, "expected " + std::to_string(expect) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    return true;
  }

  long line() const { return line_no_; }
  const std::string& name() const { return name_; }

  [[noreturn]] void fail_malformed(long line, const std::string& msg) const {
    throw DataError(DataError::Kind::MalformedRow, name_, line, msg);
  }
  [[noreturn]] void fail_invariant(const std::string& msg) const {
    throw DataError(DataError::Kind::InvariantViolation, name_, line_no_, msg);
  }

  double read_double(std::string_view field, const char* what) const {
    double v;
    if (!parse_double(field, v)) {
      fail_malformed(line_no_, std::string("invalid ") + what + " '" + std::string(field) + "'");
    }
    return v;
  }

  std::uint32_t read_id(std::string_view field, const char* what) const {
    std::uint32_t v;
    if (!parse_u32(field, v) || v == 0) {
      fail_malformed(line_no_, std::string("invalid ") + what + " '" + std::string(field) +
                                   "' (positive integer required)");
    }
    return v;
  }

  double read_unit_interval(std::string_view field, const char* what) const {
    const double v = read_double(field, what);
    if (!(v >= 0.0 && v < 1.0)) {
      fail_malformed(line_no_,
                     std::string(what) + " = " + std::string(field) + " outside [0,1)");
    }
    return v;
  }

  double read_nonneg(std::string_view field, const char* what) const {
    const double v = read_double(field, what);
    if (!(v >= 0.0)) {
      fail_malformed(line_no_, std::string(what) + " = " + std::string(field) + " is negative");
    }
    return v;
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::ifstream in_;
  std::string name_;
  std::string line_;
  long line_no_ = 0;
};

std::string render_yet(const Dataset& ds) {
  std::string out(kYetHeader);
  out += '\n';
  for (const YetRecord& r : ds.yet) {
    out += std::to_string(r.trial_id);
    out += ',';
    out += std::to_string(r.event_id);
    out += ',';
    out += std::to_string(r.time_index);
    out += ',';
    out += format_double(r.z_pe);
    out += '\n';
  }
  return out;
}

std::string render_layers(const Dataset& ds) {
  std::string out(kLayersHeader);
  out += '\n';
  for (const LayerRecord& l : ds.layers) {
    out += std::to_string(l.layer_id);
    out += ',';
    out += std::to_string(l.program_id);
    out += ',';
    out += l.cob;
    out += ',';
    out += l.lob;
    out += ',';
    out += l.tob;
    out += ',';
    for (std::size_t i = 0; i < l.elt_ids.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(l.elt_ids[i]);
    }
    out += ',';
    out += format_double(l.terms.occ_ret);
    out += ',';
    out += format_double(l.terms.occ_lim);
    out += ',';
    out += format_double(l.terms.agg_ret);
    out += ',';
    out += format_double(l.terms.agg_lim);
    out += ',';
    out += format_double(l.terms.share);
    out += '\n';
  }
  return out;
}

std::string render_eltpool(const Dataset& ds) {
  std::string out(kEltPoolHeader);
  out += '\n';
  for (const EltMeta& m : ds.elt_pool) {
    out += std::to_string(m.elt_id);
    out += ',';
    out += m.region;
    out += ',';
    out += m.peril;
    out += '\n';
  }
  return out;
}

std::string render_eelt(const std::vector<EeltEntry>& entries) {
  std::string out(kEeltHeader);
  out += '\n';
  for (const EeltEntry& e : entries) {
    out += std::to_string(e.event_id);
    out += ',';
    out += format_double(e.z_e);
    out += ',';
    out += format_double(e.mean_loss);
    out += ',';
    out += format_double(e.sigma_i);
    out += ',';
    out += format_double(e.sigma_c);
    out += ',';
    out += format_double(e.max_loss);
    out += '\n';
  }
  return out;
}

std::string render_events(const Dataset& ds) {
  std::string out(kEventsHeader);
  out += '\n';
  for (const EventCatalogRecord& e : ds.catalogue) {
    out += std::to_string(e.event_id);
    out += ',';
    out += e.region;
    out += ',';
    out += e.peril;
    out += '\n';
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError(DataError::Kind::MissingFile, dir, 0,
                    "cannot create output directory: " + ec.message());
  }
  const fs::path base(dir);
  write_file(base / "yet.csv", render_yet(dataset));
  write_file(base / "layers.csv", render_layers(dataset));
  write_file(base / "eltpool.csv", render_eltpool(dataset));
  for (const EltMeta& meta : dataset.elt_pool) {
    const auto it = dataset.eelts.find(meta.elt_id);
    static const std::vector<EeltEntry> kEmpty;
    const auto& entries = it == dataset.eelts.end() ? kEmpty : it->second;
    write_file(base / ("eelt_" + std::to_string(meta.elt_id) + ".csv"), render_eelt(entries));
  }
  write_file(base / "events.csv", render_events(dataset));
  write_file(base / "manifest.txt", dataset.manifest);
}

Dataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  Dataset ds;

  // yet.csv
  {
    CsvReader csv(base / "yet.csv", kYetHeader);
    std::vector<std::string_view> f;
    std::unordered_map<TrialId, std::uint32_t> last_time;
    while (csv.next(f, 4)) {
      YetRecord r;
      r.trial_id = csv.read_id(f[0], "trial_id");
      r.event_id = csv.read_id(f[1], "event_id");
      r.time_index = csv.read_id(f[2], "time_index");
      r.z_pe = csv.read_unit_interval(f[3], "z_pe");
      auto [it, fresh] = last_time.try_emplace(r.trial_id, r.time_index);
      if (!fresh) {
        if (r.time_index <= it->second) {
          csv.fail_invariant("time_index not strictly increasing within trial " +
                             std::to_string(r.trial_id));
        }
        it->second = r.time_index;
      }
      ds.yet.push_back(r);
    }
  }

  // eltpool.csv (before layers.csv so layer rows can be cross-checked with
  // exact line numbers)
  std::unordered_set<EltId> pool_ids;
  {
    CsvReader csv(base / "eltpool.csv", kEltPoolHeader);
    std::vector<std::string_view> f;
    while (csv.next(f, 3)) {
      EltMeta m;
      m.elt_id = csv.read_id(f[0], "elt_id");
      m.region = std::string(f[1]);
      m.peril = std::string(f[2]);
      if (!pool_ids.insert(m.elt_id).second) {
        csv.fail_invariant("duplicate elt_id " + std::to_string(m.elt_id));
      }
      ds.elt_pool.push_back(std::move(m));
    }
  }

  // layers.csv
  {
    CsvReader csv(base / "layers.csv", kLayersHeader);
    std::vector<std::string_view> f;
    std::unordered_set<LayerId> seen_layers;
    while (csv.next(f, 11)) {
      LayerRecord l;
      l.layer_id = csv.read_id(f[0], "layer_id");
      if (!seen_layers.insert(l.layer_id).second) {
        csv.fail_invariant("duplicate layer_id " + std::to_string(l.layer_id));
      }
      l.program_id = csv.read_id(f[1], "program_id");
      l.cob = std::string(f[2]);
      l.lob = std::string(f[3]);
      l.tob = std::string(f[4]);
      if (l.cob.empty() || l.lob.empty() || l.tob.empty()) {
        csv.fail_malformed(csv.line(), "empty classifier token");
      }
      if (f[5].empty()) {
        csv.fail_invariant("layer " + std::to_string(l.layer_id) + " has an empty elt_ids list");
      }
      for (std::string_view part : split(f[5], ';')) {
        const EltId elt = csv.read_id(part, "elt_id");
        if (std::find(l.elt_ids.begin(), l.elt_ids.end(), elt) != l.elt_ids.end()) {
          csv.fail_invariant("layer " + std::to_string(l.layer_id) + " lists elt_id " +
                             std::to_string(elt) + " twice");
        }
        if (!pool_ids.contains(elt)) {
          csv.fail_invariant("layer " + std::to_string(l.layer_id) + " references elt_id " +
                             std::to_string(elt) + " absent from the ELT pool");
        }
        l.elt_ids.push_back(elt);
      }
      l.terms.occ_ret = csv.read_nonneg(f[6], "occ_ret");
      l.terms.occ_lim = csv.read_nonneg(f[7], "occ_lim");
      l.terms.agg_ret = csv.read_nonneg(f[8], "agg_ret");
      l.terms.agg_lim = csv.read_nonneg(f[9], "agg_lim");
      l.terms.share = csv.read_double(f[10], "share");
      if (!(l.terms.share > 0.0 && l.terms.share <= 1.0)) {
        csv.fail_invariant("share = " + std::string(f[10]) + " outside (0,1]");
      }
      ds.layers.push_back(std::move(l));
    }
  }

  // one eelt_<id>.csv per pool entry
  for (const EltMeta& meta : ds.elt_pool) {
    CsvReader csv(base / ("eelt_" + std::to_string(meta.elt_id) + ".csv"), kEeltHeader);
    std::vector<std::string_view> f;
    std::vector<EeltEntry> entries;
    std::unordered_set<EventId> seen;
    while (csv.next(f, 6)) {
      EeltEntry e;
      e.event_id = csv.read_id(f[0], "event_id");
      e.z_e = csv.read_unit_interval(f[1], "z_e");
      e.mean_loss = csv.read_nonneg(f[2], "mean_loss");
      e.sigma_i = csv.read_nonneg(f[3], "sigma_i");
      e.sigma_c = csv.read_nonneg(f[4], "sigma_c");
      e.max_loss = csv.read_nonneg(f[5], "max_loss");
      if (e.mean_loss > e.max_loss) {
        csv.fail_invariant("mean_loss " + format_double(e.mean_loss) + " exceeds max_loss " +
                           format_double(e.max_loss));
      }
      if (!seen.insert(e.event_id).second) {
        csv.fail_invariant("duplicate event_id " + std::to_string(e.event_id));
      }
      entries.push_back(e);
    }
    ds.eelts.emplace(meta.elt_id, std::move(entries));
  }

  // events.csv
  {
    CsvReader csv(base / "events.csv", kEventsHeader);
    std::vector<std::string_view> f;
    std::unordered_set<EventId> seen;
    while (csv.next(f, 3)) {
      EventCatalogRecord e;
      e.event_id = csv.read_id(f[0], "event_id");
      e.region = std::string(f[1]);
      e.peril = std::string(f[2]);
      if (!seen.insert(e.event_id).second) {
        csv.fail_invariant("duplicate event_id " + std::to_string(e.event_id));
      }
      ds.catalogue.push_back(std::move(e));
    }
  }

  // manifest.txt is optional; reports fall back to hashing an empty string.
  {
    std::ifstream in(base / "manifest.txt", std::ios::binary);
    if (in) {
      std::ostringstream buf;
      buf << in.rdbuf();
      ds.manifest = buf.str();
    }
  }

  // Safety net; the per-row checks above should have caught everything.
  const auto violations = validate_portfolio(ds.layers, ds.elt_pool);
  if (!violations.empty()) {
    throw DataError(DataError::Kind::InvariantViolation, "layers.csv", 0,
                    violations.front().message);
  }

  ds.rebuild_index();
  return ds;
}

void write_yelt_csv(const std::string& path, std::span<const YltEntry> entries) {
  std::string out("trial_id,event_id,time_index,estimated_loss\n");
  for (const YltEntry& e : entries) {
    out += std::to_string(e.trial_id);
    out += ',';
    out += std::to_string(e.event_id);
    out += ',';
    out += std::to_string(e.time_index);
    out += ',';
    out += format_double(e.loss);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace aggrisk
