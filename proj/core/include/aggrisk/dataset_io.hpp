#pragma once

#include <string>

#include "aggrisk/dataset.hpp"

namespace aggrisk {

// CSV table files making up one dataset directory:
//   yet.csv        trial_id,event_id,time_index,z_pe
//   layers.csv     layer_id,program_id,cob,lob,tob,elt_ids,occ_ret,occ_lim,agg_ret,agg_lim,share
//                  (elt_ids is a ';'-separated id list)
//   eltpool.csv    elt_id,region,peril
//   eelt_<id>.csv  event_id,z_e,mean_loss,sigma_i,sigma_c,max_loss  (one per pool entry)
//   events.csv     event_id,region,peril
// plus manifest.txt. UTF-8, comma-separated, '.' decimal separator, LF line
// endings, newline-terminated.

/// Writes every table plus manifest.txt. Doubles are printed
/// shortest-round-trip, so write -> load -> write is byte-identical.
void write_dataset(const Dataset& dataset, const std::string& dir);

/// Loads and validates a dataset directory. Throws DataError with file/line
/// on a missing file, malformed row, or violated table invariant; the
/// returned dataset always passes validate_portfolio.
Dataset load_dataset(const std::string& dir);

/// Writes the intermediate year event loss table (debug output):
/// trial_id,event_id,time_index,estimated_loss.
void write_yelt_csv(const std::string& path, std::span<const YltEntry> entries);

}  // namespace aggrisk
