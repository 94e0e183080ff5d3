#include "pul/synthetic.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pul/errors.hpp"
#include "pul/rng.hpp"

namespace pul {

namespace {

constexpr std::uint64_t kSourceProtoSalt = 0x501;
constexpr std::uint64_t kSourceSampleSalt = 0x502;
constexpr std::uint64_t kTargetProtoSalt = 0x503;
constexpr std::uint64_t kTargetSampleSalt = 0x504;
constexpr std::uint64_t kSemiSampleSalt = 0x505;

Matrix draw_prototypes(int num_ids, int dim, double sigma, Rng& rng) {
  Matrix protos(static_cast<std::size_t>(num_ids), static_cast<std::size_t>(dim));
  for (double& v : protos.data) v = rng.normal(0.0, sigma);
  return protos;
}

// Random orthogonal matrix: Gram-Schmidt over a Gaussian matrix.
Matrix random_rotation(int dim, Rng& rng) {
  Matrix q(static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  for (int r = 0; r < dim; ++r) {
    auto row = q.row(static_cast<std::size_t>(r));
    for (int c = 0; c < dim; ++c) row[c] = rng.normal();
    for (int prev = 0; prev < r; ++prev) {
      const auto p = q.row(static_cast<std::size_t>(prev));
      const double proj = dot(row, p);
      for (int c = 0; c < dim; ++c) row[c] -= proj * p[c];
    }
    const double len = norm(row);
    if (len < 1e-12) throw InternalError("degenerate rotation draw");
    for (int c = 0; c < dim; ++c) row[c] /= len;
  }
  return q;
}

std::vector<double> shifted(const Matrix& rotation, const std::vector<double>& translation,
                            std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rotation.rows; ++r)
    out[r] = dot(rotation.row(r), x) + translation[r];
  return out;
}

struct SampleSink {
  FloatMatrix features;
  std::vector<int> labels;
  std::vector<int> cameras;
  std::size_t next = 0;

  SampleSink(std::size_t n, std::size_t dim) : features(n, dim) {
    labels.reserve(n);
    cameras.reserve(n);
  }

  void push(std::span<const double> x, int label, int camera) {
    auto row = features.row(next++);
    for (std::size_t j = 0; j < x.size(); ++j) row[j] = static_cast<float>(x[j]);
    labels.push_back(label);
    cameras.push_back(camera);
  }
};

}  // namespace

void validate(const SyntheticSpec& spec) {
  auto check_domain = [](const DomainParams& d, const char* name) {
    if (d.num_ids < 1 || d.samples_per_id < 1 || d.dim < 1)
      throw InvalidInput(std::string(name) + ": counts and dim must be >= 1");
    if (!(d.sigma_within < d.sigma_between))
      throw InvalidInput(std::string(name) + ": sigma_within must be < sigma_between");
    if (d.sigma_within < 0.0) throw InvalidInput(std::string(name) + ": sigma_within must be >= 0");
  };
  check_domain(spec.source, "source");
  check_domain(spec.target, "target");
  if (spec.source.dim != spec.target.dim)
    throw InvalidInput("source and target must share the raw dimension");
  if (spec.cameras_per_id < 2) throw InvalidInput("cameras_per_id must be >= 2");
  if (spec.query_per_id < 1 || spec.gallery_per_id < 1)
    throw InvalidInput("query_per_id and gallery_per_id must be >= 1");
  if (spec.semi_label_ids < 0 || spec.semi_label_ids > spec.target.num_ids)
    throw InvalidInput("semi_label_ids must be in [0, target.num_ids]");
  if (spec.shift.sigma_extra < 0.0 || spec.shift.translation_scale < 0.0)
    throw InvalidInput("shift magnitudes must be >= 0");
  if (spec.share_source_prototypes && spec.target.num_ids > spec.source.num_ids)
    throw InvalidInput("shared prototypes require target.num_ids <= source.num_ids");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const Rng master(spec.seed);
  const int dim = spec.source.dim;

  Rng proto_rng = master.derive(kSourceProtoSalt);
  const Matrix source_protos =
      draw_prototypes(spec.source.num_ids, dim, spec.source.sigma_between, proto_rng);

  Rng target_proto_rng = master.derive(kTargetProtoSalt);
  Matrix target_protos;
  if (spec.share_source_prototypes) {
    target_protos = Matrix(static_cast<std::size_t>(spec.target.num_ids),
                           static_cast<std::size_t>(dim));
    for (int id = 0; id < spec.target.num_ids; ++id)
      std::copy(source_protos.row(id).begin(), source_protos.row(id).end(),
                target_protos.row(id).begin());
  } else {
    target_protos =
        draw_prototypes(spec.target.num_ids, dim, spec.target.sigma_between, target_proto_rng);
  }

  Rng shift_rng(splitmix64(spec.shift.rotation_seed));
  Matrix rotation;
  if (spec.shift.rotate) {
    rotation = random_rotation(dim, shift_rng);
  } else {
    rotation = Matrix(static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) rotation.at(j, j) = 1.0;
  }
  std::vector<double> translation(static_cast<std::size_t>(dim));
  for (double& t : translation) t = shift_rng.normal(0.0, spec.shift.translation_scale);

  SyntheticData out;

  // Source: labeled, no cameras.
  {
    Rng rng = master.derive(kSourceSampleSalt);
    const std::size_t n =
        static_cast<std::size_t>(spec.source.num_ids) * spec.source.samples_per_id;
    SampleSink sink(n, static_cast<std::size_t>(dim));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int id = 0; id < spec.source.num_ids; ++id) {
      const auto proto = source_protos.row(static_cast<std::size_t>(id));
      for (int s = 0; s < spec.source.samples_per_id; ++s) {
        for (int j = 0; j < dim; ++j) x[j] = proto[j] + rng.normal(0.0, spec.source.sigma_within);
        sink.push(x, id, 0);
      }
    }
    out.source.samples = std::move(sink.features);
    out.source.labels = std::move(sink.labels);
  }

  // Target: each identity contributes train, query and gallery samples from
  // disjoint draws, all passed through the domain-shift map.
  {
    Rng rng = master.derive(kTargetSampleSalt);
    const int per_id = spec.target.samples_per_id + spec.query_per_id + spec.gallery_per_id;
    SampleSink train(
        static_cast<std::size_t>(spec.target.num_ids) * spec.target.samples_per_id,
        static_cast<std::size_t>(dim));
    SampleSink query(static_cast<std::size_t>(spec.target.num_ids) * spec.query_per_id,
                     static_cast<std::size_t>(dim));
    SampleSink gallery(static_cast<std::size_t>(spec.target.num_ids) * spec.gallery_per_id,
                       static_cast<std::size_t>(dim));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int id = 0; id < spec.target.num_ids; ++id) {
      const auto proto = target_protos.row(static_cast<std::size_t>(id));
      for (int s = 0; s < per_id; ++s) {
        for (int j = 0; j < dim; ++j) x[j] = proto[j] + rng.normal(0.0, spec.target.sigma_within);
        std::vector<double> y = shifted(rotation, translation, x);
        for (int j = 0; j < dim; ++j) y[j] += rng.normal(0.0, spec.shift.sigma_extra);
        const int camera = s % spec.cameras_per_id;
        if (s < spec.target.samples_per_id) {
          train.push(y, id, camera);
        } else if (s < spec.target.samples_per_id + spec.query_per_id) {
          query.push(y, id, camera);
        } else {
          gallery.push(y, id, camera);
        }
      }
    }
    out.target_train.samples = std::move(train.features);
    out.target_query.samples = std::move(query.features);
    out.target_query.labels = std::move(query.labels);
    out.target_query.camera_ids = std::move(query.cameras);
    out.target_gallery.samples = std::move(gallery.features);
    out.target_gallery.labels = std::move(gallery.labels);
    out.target_gallery.camera_ids = std::move(gallery.cameras);
  }

  // Optional labeled subset for semi-supervised runs: fresh draws of the
  // first semi_label_ids target identities. Generated last so the four main
  // splits do not depend on semi_label_ids.
  if (spec.semi_label_ids > 0) {
    Rng rng = master.derive(kSemiSampleSalt);
    SampleSink semi(
        static_cast<std::size_t>(spec.semi_label_ids) * spec.target.samples_per_id,
        static_cast<std::size_t>(dim));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int id = 0; id < spec.semi_label_ids; ++id) {
      const auto proto = target_protos.row(static_cast<std::size_t>(id));
      for (int s = 0; s < spec.target.samples_per_id; ++s) {
        for (int j = 0; j < dim; ++j) x[j] = proto[j] + rng.normal(0.0, spec.target.sigma_within);
        std::vector<double> y = shifted(rotation, translation, x);
        for (int j = 0; j < dim; ++j) y[j] += rng.normal(0.0, spec.shift.sigma_extra);
        semi.push(y, id, 0);
      }
    }
    Dataset ds;
    ds.samples = std::move(semi.features);
    ds.labels = std::move(semi.labels);
    out.target_semi = std::move(ds);
  }
  return out;
}

}  // namespace pul
