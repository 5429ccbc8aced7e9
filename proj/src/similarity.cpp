#include "toolsmith/similarity.hpp"

#include "toolsmith/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace toolsmith {
namespace {

std::vector<double> row_norms(const EmbeddingMatrix& m) {
  std::vector<double> norms(m.rows);
  for (size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (size_t k = 0; k < m.dim; ++k) s += r[k] * r[k];
    norms[i] = std::sqrt(s);
  }
  return norms;
}

inline double cosine(const EmbeddingMatrix& m, const std::vector<double>& norms, size_t i, size_t j) {
  if (norms[i] == 0.0 || norms[j] == 0.0) return 0.0;
  const double* a = m.row(i);
  const double* b = m.row(j);
  double dot = 0.0;
  for (size_t k = 0; k < m.dim; ++k) dot += a[k] * b[k];
  return std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

size_t find_root(std::vector<size_t>& parent, size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

EmbeddingMatrix pack_rows(const std::vector<std::vector<double>>& vectors) {
  EmbeddingMatrix m;
  m.rows = vectors.size();
  m.dim = vectors.empty() ? 0 : vectors.front().size();
  m.data.reserve(m.rows * m.dim);
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != m.dim) {
      throw Error(ErrorCode::DimensionMismatch, "vector " + std::to_string(i) + " has dimension " +
                                                    std::to_string(vectors[i].size()) + ", expected " +
                                                    std::to_string(m.dim));
    }
    for (double v : vectors[i]) {
      if (!std::isfinite(v)) throw Error(ErrorCode::EmbedderFailure, "vector " + std::to_string(i) + " is not finite");
    }
    m.data.insert(m.data.end(), vectors[i].begin(), vectors[i].end());
  }
  return m;
}

std::vector<double> cosine_matrix_serial(const EmbeddingMatrix& m) {
  const size_t n = m.rows;
  const auto norms = row_norms(m);
  std::vector<double> sim(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      const double c = cosine(m, norms, i, j);
      sim[i * n + j] = c;
      sim[j * n + i] = c;
    }
  }
  return sim;
}

std::vector<double> cosine_matrix_parallel(const EmbeddingMatrix& m) {
  const long n = static_cast<long>(m.rows);
  const auto norms = row_norms(m);
  std::vector<double> sim(m.rows * m.rows, 0.0);
  // Each (i, j >= i) pair is written by exactly one thread, mirrored by the same one.
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      const double c = cosine(m, norms, static_cast<size_t>(i), static_cast<size_t>(j));
      sim[i * n + j] = c;
      sim[j * n + i] = c;
    }
  }
  return sim;
}

std::vector<Cluster> single_linkage(const std::vector<double>& sim, size_t n, double threshold) {
  if (sim.size() != n * n) throw Error(ErrorCode::DimensionMismatch, "similarity matrix is not n x n");
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), size_t{0});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (sim[i * n + j] >= threshold) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }
  std::vector<std::vector<size_t>> groups(n);
  for (size_t i = 0; i < n; ++i) groups[find_root(parent, i)].push_back(i);

  std::vector<Cluster> out;
  for (auto& g : groups) {
    if (g.size() < 2) continue;
    Cluster c;
    c.members = std::move(g);
    c.similarity = -1.0;
    for (size_t a = 0; a < c.members.size(); ++a) {
      for (size_t b = a + 1; b < c.members.size(); ++b) {
        c.similarity = std::max(c.similarity, sim[c.members[a] * n + c.members[b]]);
      }
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
  return out;
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> v(dim_, 0.0);
    std::string tok;
    auto flush = [&] {
      if (tok.empty()) return;
      const uint64_t h = fnv1a(tok);
      v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
      tok.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        tok.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace toolsmith
