#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace toolsmith {

// Row-major n x d matrix of embedding vectors.
struct EmbeddingMatrix {
  size_t rows = 0;
  size_t dim = 0;
  std::vector<double> data;

  const double* row(size_t i) const { return data.data() + i * dim; }
};

// Throws DimensionMismatch when the vectors disagree in length.
EmbeddingMatrix pack_rows(const std::vector<std::vector<double>>& vectors);

/// Pairwise cosine similarity, n x n row-major, diagonal 1 for nonzero rows.
/// Zero rows have similarity 0 with everything, themselves included.
std::vector<double> cosine_matrix_serial(const EmbeddingMatrix& m);
// Same result computed with OpenMP over rows.
std::vector<double> cosine_matrix_parallel(const EmbeddingMatrix& m);

struct Cluster {
  std::vector<size_t> members;  // ascending
  double similarity = 0.0;      // max pairwise similarity inside the cluster
};

/// Single-linkage components over the edges with similarity >= threshold.
/// Singletons are dropped; clusters are ordered by their smallest member.
std::vector<Cluster> single_linkage(const std::vector<double>& sim, size_t n, double threshold);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

/// Deterministic bag-of-words embedder: lowercase alphanumeric tokens,
/// signed feature hashing (FNV-1a) into `dim` buckets, L2 normalized.
class HashEmbedder : public EmbeddingProvider {
 public:
  explicit HashEmbedder(size_t dim = 256) : dim_(dim) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  size_t dim_;
};

}  // namespace toolsmith
