#include "legmpc/features.h"

#include <cmath>

namespace legmpc {

ProjectionMatrix::ProjectionMatrix(std::uint64_t seed, int in_dim, int out_dim) : seed_(seed) {
  if (in_dim < 1 || out_dim < 1) throw Error("make_projection: dimensions must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  m_.resize(out_dim, in_dim);
  for (int r = 0; r < out_dim; ++r) {
    for (int c = 0; c < in_dim; ++c) m_(r, c) = dist(rng);
  }
}

ProjectionMatrix make_projection(std::uint64_t seed, int in_dim, int out_dim) {
  return ProjectionMatrix(seed, in_dim, out_dim);
}

Eigen::VectorXd flatten(const ImagePatch& patch) {
  return Eigen::Map<const Eigen::VectorXd>(patch.pixels.data(),
                                           static_cast<Eigen::Index>(patch.pixels.size()));
}

Embedding embed(const ImagePatch& patch, const ProjectionMatrix& proj) {
  if (static_cast<int>(patch.pixels.size()) != proj.cols()) {
    throw Error("embed: patch has " + std::to_string(patch.pixels.size()) +
                " values, projection expects " + std::to_string(proj.cols()));
  }
  return {proj.matrix() * flatten(patch), EmbeddingSource::kRandomProjection};
}

Embedding one_hot(int terrain_index, int n_terrains) {
  if (n_terrains < 1 || terrain_index < 0 || terrain_index >= n_terrains) {
    throw Error("one_hot: index " + std::to_string(terrain_index) + " out of range for " +
                std::to_string(n_terrains) + " terrains");
  }
  Embedding e{Eigen::VectorXd::Zero(n_terrains), EmbeddingSource::kOneHot};
  e.values[terrain_index] = 1.0;
  return e;
}

namespace {

constexpr char kEmbeddingMagic[] = "RCHE";
constexpr std::uint32_t kEmbeddingVersion = 1;

}  // namespace

void save_embeddings(const std::string& path, const std::vector<Embedding>& table) {
  const std::uint32_t k = table.empty() ? 0u : static_cast<std::uint32_t>(table[0].values.size());
  ByteWriter w;
  w.magic(std::string_view(kEmbeddingMagic, 4));
  w.u32(kEmbeddingVersion);
  w.u32(k);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const Embedding& e : table) {
    if (static_cast<std::uint32_t>(e.values.size()) != k) {
      throw ArtifactError("save_embeddings: mixed embedding dimensions");
    }
    for (double v : e.values) w.f32(static_cast<float>(v));
  }
  w.seal();
  w.write_file(path);
}

std::vector<Embedding> load_embeddings(const std::string& path) {
  ByteReader r = ByteReader::from_file(path, "embeddings '" + path + "'");
  r.expect_magic(std::string_view(kEmbeddingMagic, 4));
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw ArtifactError(r.what() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t k = r.u32();
  const std::uint32_t count = r.u32();
  if (k == 0 && count > 0) throw ArtifactError(r.what() + ": zero dimension");
  std::vector<Embedding> table(count);
  for (auto& e : table) {
    e.source = EmbeddingSource::kPrecomputedFile;
    e.values.resize(k);
    for (std::uint32_t j = 0; j < k; ++j) e.values[j] = static_cast<double>(r.f32());
  }
  if (!r.at_end()) throw ArtifactError(r.what() + ": trailing bytes");
  return table;
}

}  // namespace legmpc
