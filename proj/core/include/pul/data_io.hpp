#pragma once

#include <string>
#include <vector>

#include "pul/types.hpp"

namespace pul {

// Binary dataset format, little-endian:
//   "PULD" | u32 version | u64 n | u32 dim | u8 flags | f32 features
//   | i32 labels (flag bit 0) | i32 cameras (flag bit 1)
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& bytes);
void save_dataset(const std::string& path, const Dataset& dataset);

// Dispatches on extension: ".csv" goes through load_dataset_csv.
Dataset load_dataset(const std::string& path);

// Header row names the columns: f0,...,f{D-1}[,label][,camera].
Dataset load_dataset_csv(const std::string& path);

// Binary checkpoint format, little-endian:
//   "PULM" | u32 version | u8 arch | u32 d,h,e,c | f64 tensors
std::string serialize_model(const EmbedModel& model);
EmbedModel parse_model(const std::string& bytes);
void save_model(const std::string& path, const EmbedModel& model);
EmbedModel load_model(const std::string& path);

// Bit-exact round trips for the remaining value types, mainly for run
// snapshots and debugging dumps.
std::string serialize_cluster_state(const ClusterState& state);
ClusterState parse_cluster_state(const std::string& bytes);
std::string serialize_selection_mask(const SelectionMask& mask);
SelectionMask parse_selection_mask(const std::string& bytes);
std::string serialize_pul_config(const PulConfig& config);
PulConfig parse_pul_config(const std::string& bytes);
std::string serialize_run_state(const PulRunState& state);
PulRunState parse_run_state(const std::string& bytes);

// One JSON object per line. The writer holds an exclusive advisory lock for
// its lifetime; a second writer on the same path fails immediately.
class HistoryWriter {
 public:
  explicit HistoryWriter(const std::string& path);
  ~HistoryWriter();
  HistoryWriter(const HistoryWriter&) = delete;
  HistoryWriter& operator=(const HistoryWriter&) = delete;

  void append(const IterationRecord& record);

 private:
  int fd_ = -1;
  std::string path_;
};

void append_history_record(const std::string& path, const IterationRecord& record);
std::vector<IterationRecord> read_history(const std::string& path);

std::string format_history_record(const IterationRecord& record);  // no trailing newline

}  // namespace pul
