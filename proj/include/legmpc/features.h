#ifndef LEGMPC_FEATURES_H_
#define LEGMPC_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "legmpc/simworld.h"

namespace legmpc {

enum class EmbeddingSource : std::uint32_t { kOneHot = 0, kRandomProjection = 1, kPrecomputedFile = 2 };

struct Embedding {
  Eigen::VectorXd values;
  EmbeddingSource source = EmbeddingSource::kRandomProjection;
};

// Fixed random matrix mapping a flattened patch to an embedding. Entries are
// i.i.d. N(0, 1/in_dim), fully determined by (seed, rows, cols).
class ProjectionMatrix {
 public:
  ProjectionMatrix(std::uint64_t seed, int in_dim, int out_dim);

  const Eigen::MatrixXd& matrix() const { return m_; }
  int rows() const { return static_cast<int>(m_.rows()); }
  int cols() const { return static_cast<int>(m_.cols()); }
  std::uint64_t seed() const { return seed_; }

 private:
  Eigen::MatrixXd m_;
  std::uint64_t seed_;
};

ProjectionMatrix make_projection(std::uint64_t seed, int in_dim, int out_dim);

Eigen::VectorXd flatten(const ImagePatch& patch);

Embedding embed(const ImagePatch& patch, const ProjectionMatrix& proj);

Embedding one_hot(int terrain_index, int n_terrains);

// Precomputed embedding table, one row per rollout id (row index).
void save_embeddings(const std::string& path, const std::vector<Embedding>& table);
std::vector<Embedding> load_embeddings(const std::string& path);

}  // namespace legmpc

#endif  // LEGMPC_FEATURES_H_
