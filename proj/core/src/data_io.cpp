#include "pul/data_io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pul/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(float) == 4 && sizeof(double) == 8);

namespace pul {

namespace {

constexpr char kDatasetMagic[4] = {'P', 'U', 'L', 'D'};
constexpr char kModelMagic[4] = {'P', 'U', 'L', 'M'};
constexpr char kClusterMagic[4] = {'P', 'U', 'L', 'S'};
constexpr char kMaskMagic[4] = {'P', 'U', 'L', 'V'};
constexpr char kConfigMagic[4] = {'P', 'U', 'L', 'C'};
constexpr char kRunMagic[4] = {'P', 'U', 'L', 'R'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T read(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size())
      throw ParseError(std::string("truncated ") + what, pos_);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <class T>
  void read_array(T* out, std::size_t count, const char* what) {
    const std::size_t size = count * sizeof(T);
    if (pos_ + size > bytes_.size()) throw ParseError(std::string("truncated ") + what, pos_);
    std::memcpy(out, bytes_.data() + pos_, size);
    pos_ += size;
  }

  void expect_magic(const char (&magic)[4], const char* what) {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), magic, 4) != 0)
      throw ParseError(std::string("bad magic for ") + what, 0);
    pos_ = 4;
  }

  void expect_end() {
    if (pos_ != bytes_.size()) throw ParseError("trailing bytes after payload", pos_);
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void append(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
void append_array(std::string& out, const T* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(T));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

nlohmann::json metrics_to_json(const EvalMetrics& m) {
  return nlohmann::json{{"rank1", m.rank1},       {"rank5", m.rank5},
                        {"rank10", m.rank10},     {"rank20", m.rank20},
                        {"mAP", m.map},           {"num_queries", m.num_queries},
                        {"num_skipped", m.num_skipped}};
}

EvalMetrics metrics_from_json(const nlohmann::json& j) {
  EvalMetrics m;
  m.rank1 = j.at("rank1").get<double>();
  m.rank5 = j.at("rank5").get<double>();
  m.rank10 = j.at("rank10").get<double>();
  m.rank20 = j.at("rank20").get<double>();
  m.map = j.at("mAP").get<double>();
  m.num_queries = j.at("num_queries").get<int>();
  m.num_skipped = j.at("num_skipped").get<int>();
  return m;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  validate(dataset);
  std::string out;
  out.append(kDatasetMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::uint64_t>(dataset.samples.rows));
  append(out, static_cast<std::uint32_t>(dataset.samples.cols));
  const std::uint8_t flags = (dataset.labels ? 1 : 0) | (dataset.camera_ids ? 2 : 0);
  append(out, flags);
  append_array(out, dataset.samples.data.data(), dataset.samples.data.size());
  if (dataset.labels) {
    for (int v : *dataset.labels) append(out, static_cast<std::int32_t>(v));
  }
  if (dataset.camera_ids) {
    for (int v : *dataset.camera_ids) append(out, static_cast<std::int32_t>(v));
  }
  return out;
}

Dataset parse_dataset(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kDatasetMagic, "dataset");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported dataset version " + std::to_string(version));
  const auto n = reader.read<std::uint64_t>("sample count");
  const auto dim = reader.read<std::uint32_t>("dimension");
  const auto flags = reader.read<std::uint8_t>("flags");
  if (n == 0 || dim == 0) throw ParseError("empty dataset", reader.pos());
  if (flags > 3) throw ParseError("unknown flag bits", reader.pos() - 1);

  Dataset ds;
  ds.samples = FloatMatrix(static_cast<std::size_t>(n), dim);
  reader.read_array(ds.samples.data.data(), ds.samples.data.size(), "feature payload");
  if (flags & 1) {
    std::vector<std::int32_t> raw(n);
    reader.read_array(raw.data(), raw.size(), "label payload");
    ds.labels = std::vector<int>(raw.begin(), raw.end());
  }
  if (flags & 2) {
    std::vector<std::int32_t> raw(n);
    reader.read_array(raw.data(), raw.size(), "camera payload");
    ds.camera_ids = std::vector<int>(raw.begin(), raw.end());
  }
  reader.expect_end();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  write_file(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::string& path) {
  if (ends_with(path, ".csv")) return load_dataset_csv(path);
  return parse_dataset(read_file(path));
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw ParseError("missing CSV header", 0);

  // Header names the columns: f0,...,f{D-1}[,label][,camera]
  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
  }
  std::size_t dim = 0;
  bool has_label = false, has_camera = false;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const std::string& name = columns[c];
    if (name == "f" + std::to_string(dim)) {
      ++dim;
    } else if (name == "label" && !has_label && !has_camera) {
      has_label = true;
    } else if (name == "camera" && !has_camera) {
      has_camera = true;
    } else {
      throw ParseError("unexpected CSV column '" + name + "'", 0);
    }
  }
  if (dim == 0) throw ParseError("CSV header declares no feature columns", 0);

  std::vector<float> features;
  std::vector<int> labels, cameras;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (!std::getline(ss, cell, ','))
        throw ParseError("line " + std::to_string(line_no) + " has too few columns", 0);
      try {
        if (c < dim) {
          features.push_back(std::stof(cell));
        } else if (columns[c] == "label") {
          labels.push_back(std::stoi(cell));
        } else {
          cameras.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad value '" + cell + "'", 0);
      }
    }
    if (std::getline(ss, cell, ','))
      throw ParseError("line " + std::to_string(line_no) + " has too many columns", 0);
  }
  if (features.empty()) throw ParseError("CSV contains no data rows", 0);

  Dataset ds;
  ds.samples.rows = features.size() / dim;
  ds.samples.cols = dim;
  ds.samples.data = std::move(features);
  if (has_label) ds.labels = std::move(labels);
  if (has_camera) ds.camera_ids = std::move(cameras);
  validate(ds);
  return ds;
}

std::string serialize_model(const EmbedModel& model) {
  validate(model);
  std::string out;
  out.append(kModelMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::uint8_t>(model.arch));
  append(out, static_cast<std::uint32_t>(model.input_dim));
  append(out, static_cast<std::uint32_t>(model.hidden_dim));
  append(out, static_cast<std::uint32_t>(model.embed_dim));
  append(out, static_cast<std::uint32_t>(model.num_classes));
  append_array(out, model.w1.data.data(), model.w1.data.size());
  append_array(out, model.b1.data(), model.b1.size());
  append_array(out, model.w2.data.data(), model.w2.data.size());
  append_array(out, model.b2.data(), model.b2.size());
  append_array(out, model.wc.data.data(), model.wc.data.size());
  append_array(out, model.bc.data(), model.bc.size());
  return out;
}

EmbedModel parse_model(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kModelMagic, "model");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported model version " + std::to_string(version));
  const auto arch = reader.read<std::uint8_t>("arch");
  if (arch > 1) throw ParseError("unknown architecture tag", reader.pos() - 1);
  const auto d = reader.read<std::uint32_t>("input_dim");
  const auto h = reader.read<std::uint32_t>("hidden_dim");
  const auto e = reader.read<std::uint32_t>("embed_dim");
  const auto c = reader.read<std::uint32_t>("num_classes");

  EmbedModel model;
  model.arch = static_cast<EmbedArch>(arch);
  model.input_dim = static_cast<int>(d);
  model.hidden_dim = static_cast<int>(h);
  model.embed_dim = static_cast<int>(e);
  model.num_classes = static_cast<int>(c);
  const std::size_t first_out = model.arch == EmbedArch::linear ? e : h;
  model.w1 = Matrix(first_out, d);
  model.b1.resize(first_out);
  if (model.arch == EmbedArch::one_hidden) {
    model.w2 = Matrix(e, h);
    model.b2.resize(e);
  }
  model.wc = Matrix(c, e);
  model.bc.resize(c);
  reader.read_array(model.w1.data.data(), model.w1.data.size(), "w1");
  reader.read_array(model.b1.data(), model.b1.size(), "b1");
  reader.read_array(model.w2.data.data(), model.w2.data.size(), "w2");
  reader.read_array(model.b2.data(), model.b2.size(), "b2");
  reader.read_array(model.wc.data.data(), model.wc.data.size(), "wc");
  reader.read_array(model.bc.data(), model.bc.size(), "bc");
  reader.expect_end();
  validate(model);
  return model;
}

void save_model(const std::string& path, const EmbedModel& model) {
  write_file(path, serialize_model(model));
}

EmbedModel load_model(const std::string& path) { return parse_model(read_file(path)); }

std::string serialize_cluster_state(const ClusterState& state) {
  std::string out;
  out.append(kClusterMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::int32_t>(state.k));
  append(out, static_cast<std::uint64_t>(state.assignments.size()));
  append(out, static_cast<std::uint32_t>(state.centroids.cols));
  for (int a : state.assignments) append(out, static_cast<std::int32_t>(a));
  append_array(out, state.centroids.data.data(), state.centroids.data.size());
  const std::uint8_t has_centers = state.center_indices.empty() ? 0 : 1;
  append(out, has_centers);
  if (has_centers) {
    append_array(out, state.center_features.data.data(), state.center_features.data.size());
    for (int idx : state.center_indices) append(out, static_cast<std::int32_t>(idx));
  }
  return out;
}

ClusterState parse_cluster_state(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kClusterMagic, "cluster state");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported cluster state version " + std::to_string(version));
  ClusterState state;
  state.k = reader.read<std::int32_t>("k");
  const auto n = reader.read<std::uint64_t>("sample count");
  const auto e = reader.read<std::uint32_t>("dimension");
  state.assignments.resize(n);
  for (auto& a : state.assignments) a = reader.read<std::int32_t>("assignment");
  state.centroids = Matrix(static_cast<std::size_t>(state.k), e);
  reader.read_array(state.centroids.data.data(), state.centroids.data.size(), "centroids");
  if (reader.read<std::uint8_t>("center flag")) {
    state.center_features = Matrix(static_cast<std::size_t>(state.k), e);
    reader.read_array(state.center_features.data.data(), state.center_features.data.size(),
                      "center features");
    state.center_indices.resize(static_cast<std::size_t>(state.k));
    for (auto& idx : state.center_indices) idx = reader.read<std::int32_t>("center index");
  }
  reader.expect_end();
  return state;
}

std::string serialize_selection_mask(const SelectionMask& mask) {
  std::string out;
  out.append(kMaskMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::uint64_t>(mask.v.size()));
  append(out, mask.lambda);
  append(out, static_cast<std::int32_t>(mask.selected_count));
  append_array(out, mask.v.data(), mask.v.size());
  return out;
}

SelectionMask parse_selection_mask(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kMaskMagic, "selection mask");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported selection mask version " + std::to_string(version));
  SelectionMask mask;
  const auto n = reader.read<std::uint64_t>("sample count");
  mask.lambda = reader.read<double>("lambda");
  mask.selected_count = reader.read<std::int32_t>("selected count");
  mask.v.resize(n);
  reader.read_array(mask.v.data(), mask.v.size(), "mask payload");
  reader.expect_end();
  return mask;
}

std::string serialize_pul_config(const PulConfig& config) {
  std::string out;
  out.append(kConfigMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::int32_t>(config.k));
  append(out, config.lambda);
  append(out, static_cast<std::int32_t>(config.max_pul_iters));
  append(out, static_cast<std::int32_t>(config.kmeans_max_iters));
  append(out, config.sgd.learning_rate);
  append(out, config.sgd.momentum);
  append(out, static_cast<std::int32_t>(config.sgd.epochs_per_iter));
  append(out, static_cast<std::int32_t>(config.sgd.batch_size));
  append(out, static_cast<std::int32_t>(config.sgd.init_epochs));
  append(out, static_cast<std::int32_t>(config.convergence.patience));
  append(out, config.convergence.rel_tol);
  append(out, static_cast<std::int32_t>(config.embed.hidden_dim));
  append(out, static_cast<std::int32_t>(config.embed.embed_dim));
  append(out, static_cast<std::uint8_t>(config.embed.linear));
  append(out, config.seed);
  append(out, static_cast<std::uint8_t>(config.fine_tune_from_original));
  append(out, static_cast<std::uint8_t>(config.selection_enabled));
  return out;
}

PulConfig parse_pul_config(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kConfigMagic, "config");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported config version " + std::to_string(version));
  PulConfig c;
  c.k = reader.read<std::int32_t>("k");
  c.lambda = reader.read<double>("lambda");
  c.max_pul_iters = reader.read<std::int32_t>("max_pul_iters");
  c.kmeans_max_iters = reader.read<std::int32_t>("kmeans_max_iters");
  c.sgd.learning_rate = reader.read<double>("learning_rate");
  c.sgd.momentum = reader.read<double>("momentum");
  c.sgd.epochs_per_iter = reader.read<std::int32_t>("epochs_per_iter");
  c.sgd.batch_size = reader.read<std::int32_t>("batch_size");
  c.sgd.init_epochs = reader.read<std::int32_t>("init_epochs");
  c.convergence.patience = reader.read<std::int32_t>("patience");
  c.convergence.rel_tol = reader.read<double>("rel_tol");
  c.embed.hidden_dim = reader.read<std::int32_t>("hidden_dim");
  c.embed.embed_dim = reader.read<std::int32_t>("embed_dim");
  c.embed.linear = reader.read<std::uint8_t>("linear") != 0;
  c.seed = reader.read<std::uint64_t>("seed");
  c.fine_tune_from_original = reader.read<std::uint8_t>("fine_tune_from_original") != 0;
  c.selection_enabled = reader.read<std::uint8_t>("selection_enabled") != 0;
  reader.expect_end();
  return c;
}

namespace {

void append_record(std::string& out, const IterationRecord& rec) {
  append(out, static_cast<std::int32_t>(rec.iter));
  append(out, static_cast<std::int32_t>(rec.selected_count));
  append(out, rec.selected_fraction);
  append(out, rec.kmeans_objective);
  append(out, rec.train_loss);
  append(out, static_cast<std::uint8_t>(rec.metrics.has_value()));
  if (rec.metrics) {
    append(out, rec.metrics->rank1);
    append(out, rec.metrics->rank5);
    append(out, rec.metrics->rank10);
    append(out, rec.metrics->rank20);
    append(out, rec.metrics->map);
    append(out, static_cast<std::int32_t>(rec.metrics->num_queries));
    append(out, static_cast<std::int32_t>(rec.metrics->num_skipped));
  }
}

IterationRecord read_record(ByteReader& reader) {
  IterationRecord rec;
  rec.iter = reader.read<std::int32_t>("iter");
  rec.selected_count = reader.read<std::int32_t>("selected_count");
  rec.selected_fraction = reader.read<double>("selected_fraction");
  rec.kmeans_objective = reader.read<double>("kmeans_objective");
  rec.train_loss = reader.read<double>("train_loss");
  if (reader.read<std::uint8_t>("metrics flag")) {
    EvalMetrics m;
    m.rank1 = reader.read<double>("rank1");
    m.rank5 = reader.read<double>("rank5");
    m.rank10 = reader.read<double>("rank10");
    m.rank20 = reader.read<double>("rank20");
    m.map = reader.read<double>("mAP");
    m.num_queries = reader.read<std::int32_t>("num_queries");
    m.num_skipped = reader.read<std::int32_t>("num_skipped");
    rec.metrics = m;
  }
  return rec;
}

}  // namespace

std::string serialize_run_state(const PulRunState& state) {
  std::string out;
  out.append(kRunMagic, 4);
  append(out, kFormatVersion);
  append(out, static_cast<std::int32_t>(state.iteration));
  append(out, static_cast<std::uint8_t>(state.converged));
  const std::string original = serialize_model(state.original);
  const std::string current = serialize_model(state.current);
  append(out, static_cast<std::uint64_t>(original.size()));
  out += original;
  append(out, static_cast<std::uint64_t>(current.size()));
  out += current;
  append(out, static_cast<std::uint64_t>(state.history.size()));
  for (const auto& rec : state.history) append_record(out, rec);
  return out;
}

PulRunState parse_run_state(const std::string& bytes) {
  ByteReader reader(bytes);
  reader.expect_magic(kRunMagic, "run state");
  const auto version = reader.read<std::uint32_t>("version");
  if (version != kFormatVersion)
    throw VersionError("unsupported run state version " + std::to_string(version));
  PulRunState state;
  state.iteration = reader.read<std::int32_t>("iteration");
  state.converged = reader.read<std::uint8_t>("converged") != 0;
  const auto original_size = reader.read<std::uint64_t>("original model size");
  std::string original(original_size, '\0');
  reader.read_array(original.data(), original.size(), "original model");
  state.original = parse_model(original);
  const auto current_size = reader.read<std::uint64_t>("current model size");
  std::string current(current_size, '\0');
  reader.read_array(current.data(), current.size(), "current model");
  state.current = parse_model(current);
  const auto count = reader.read<std::uint64_t>("history length");
  state.history.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) state.history.push_back(read_record(reader));
  reader.expect_end();
  return state;
}

std::string format_history_record(const IterationRecord& record) {
  nlohmann::json j{{"iter", record.iter},
                   {"selected_count", record.selected_count},
                   {"selected_fraction", record.selected_fraction},
                   {"kmeans_objective", record.kmeans_objective},
                   {"train_loss", record.train_loss}};
  if (record.metrics) j["metrics"] = metrics_to_json(*record.metrics);
  return j.dump();
}

HistoryWriter::HistoryWriter(const std::string& path) : path_(path) {
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) throw IoError("cannot open " + path + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK)
      throw IoError("history file " + path + " is locked by another writer");
    throw IoError("cannot lock " + path + ": " + std::strerror(err));
  }
}

HistoryWriter::~HistoryWriter() {
  if (fd_ >= 0) ::close(fd_);  // releases the lock
}

void HistoryWriter::append(const IterationRecord& record) {
  const std::string line = format_history_record(record) + "\n";
  const char* data = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t wrote = ::write(fd_, data, left);
    if (wrote < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failure on " + path_ + ": " + std::strerror(errno));
    }
    data += wrote;
    left -= static_cast<std::size_t>(wrote);
  }
}

void append_history_record(const std::string& path, const IterationRecord& record) {
  HistoryWriter writer(path);
  writer.append(record);
}

std::vector<IterationRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<IterationRecord> records;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad history line: ") + e.what(), offset);
      }
      IterationRecord rec;
      rec.iter = j.at("iter").get<int>();
      rec.selected_count = j.at("selected_count").get<int>();
      rec.selected_fraction = j.at("selected_fraction").get<double>();
      rec.kmeans_objective = j.at("kmeans_objective").get<double>();
      rec.train_loss = j.at("train_loss").get<double>();
      if (j.contains("metrics")) rec.metrics = metrics_from_json(j.at("metrics"));
      records.push_back(std::move(rec));
    }
    offset += line.size() + 1;
  }
  return records;
}

}  // namespace pul
