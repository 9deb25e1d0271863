#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "garment/errors.hpp"
#include "garment/image.hpp"

namespace garment {

// Unit-norm image feature vector.
struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string provider_id;
};

class ProviderError : public Error {
 public:
  enum class Kind { Timeout, HttpStatus, Malformed };
  ProviderError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(const Image& image) = 0;
  virtual std::string id() const = 0;
  virtual int dimension() const = 0;

  // Providers that can push gradients back to pixels override these. `dL_dE`
  // is the gradient w.r.t. the final unit-normalized embedding.
  virtual bool differentiable() const { return false; }
  virtual Image embed_backward(const Image& image, const Eigen::VectorXd& dL_dE);
};

// Deterministic local stand-in for the CLIP-style service: 32x32 grayscale
// box downsample, mean subtraction, L2 normalization (D = 1024). A constant
// image has no direction after mean subtraction and maps to the canonical
// basis vector e0. Fully differentiable.
class StubProvider : public EmbeddingProvider {
 public:
  EmbeddingVector embed(const Image& image) override;
  std::string id() const override { return "stub-v1"; }
  int dimension() const override { return 1024; }
  bool differentiable() const override { return true; }
  Image embed_backward(const Image& image, const Eigen::VectorXd& dL_dE) override;
};

// HTTP client for an embedding service: POST /embed with a PNG body, response
// JSON {"embedding": [...]}. Responses are renormalized locally and cached by
// the SHA-256 of the encoded PNG (in memory, plus on disk when `cache_dir` is
// set). Identical concurrent requests are deduplicated in flight. Errors are
// retried `retries` times with exponential backoff.
class RemoteProvider : public EmbeddingProvider {
 public:
  explicit RemoteProvider(std::string endpoint, double timeout_seconds = 10.0, int retries = 3,
                          std::string cache_dir = "");
  ~RemoteProvider() override;
  EmbeddingVector embed(const Image& image) override;
  std::string id() const override { return "remote:" + endpoint_; }
  int dimension() const override { return dimension_; }

  // Network round trips performed (cache misses), for tests.
  int request_count() const;

 private:
  struct Impl;
  Eigen::VectorXd fetch(const std::vector<uint8_t>& png_bytes);

  std::string endpoint_;
  int dimension_ = -1;  // fixed by the first successful response
  std::unique_ptr<Impl> impl_;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace garment
