#include "garment/embed.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "garment/hash.hpp"
#include "httplib.h"
#include "json.hpp"

namespace garment {

Image EmbeddingProvider::embed_backward(const Image&, const Eigen::VectorXd&) {
  throw Error("provider '" + id() + "' is not differentiable");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = a.values.norm(), nb = b.values.norm();
  if (na <= 0.0 || nb <= 0.0) throw Error("cosine similarity of a zero embedding");
  return a.values.dot(b.values) / (na * nb);
}

namespace {

constexpr int kStubSide = 32;

struct Cell {
  int x0, x1, y0, y1;  // half-open pixel ranges
  double inv_count;
};

Cell stub_cell(const Image& img, int cx, int cy) {
  Cell c;
  c.x0 = cx * img.width / kStubSide;
  c.x1 = std::max(c.x0 + 1, (cx + 1) * img.width / kStubSide);
  c.y0 = cy * img.height / kStubSide;
  c.y1 = std::max(c.y0 + 1, (cy + 1) * img.height / kStubSide);
  c.x1 = std::min(c.x1, img.width);
  c.y1 = std::min(c.y1, img.height);
  if (c.x0 >= c.x1) c.x0 = c.x1 - 1;
  if (c.y0 >= c.y1) c.y0 = c.y1 - 1;
  c.inv_count = 1.0 / (double(c.x1 - c.x0) * double(c.y1 - c.y0));
  return c;
}

double gray_at(const Image& img, int x, int y) {
  const int nc = std::min(img.channels, 3);
  double g = 0.0;
  for (int c = 0; c < nc; ++c) g += img.at(x, y, c);
  return g / nc;
}

}  // namespace

EmbeddingVector StubProvider::embed(const Image& image) {
  if (image.width < 1 || image.height < 1) throw Error("cannot embed an empty image");
  const int D = dimension();
  Eigen::VectorXd y(D);
  for (int cy = 0; cy < kStubSide; ++cy)
    for (int cx = 0; cx < kStubSide; ++cx) {
      const Cell c = stub_cell(image, cx, cy);
      double acc = 0.0;
      for (int py = c.y0; py < c.y1; ++py)
        for (int px = c.x0; px < c.x1; ++px) acc += gray_at(image, px, py);
      y[cy * kStubSide + cx] = acc * c.inv_count;
    }
  const Eigen::VectorXd z = y.array() - y.mean();
  const double n = z.norm();
  EmbeddingVector out;
  out.provider_id = id();
  if (n < 1e-12) {
    out.values = Eigen::VectorXd::Zero(D);
    out.values[0] = 1.0;  // constant image: canonical basis vector
  } else {
    out.values = z / n;
  }
  return out;
}

Image StubProvider::embed_backward(const Image& image, const Eigen::VectorXd& dL_dE) {
  if (dL_dE.size() != dimension()) throw Error("embedding gradient has the wrong dimension");
  Image grad(image.width, image.height, image.channels, 0.f);
  // Recompute the forward intermediates.
  const int D = dimension();
  Eigen::VectorXd y(D);
  for (int cy = 0; cy < kStubSide; ++cy)
    for (int cx = 0; cx < kStubSide; ++cx) {
      const Cell c = stub_cell(image, cx, cy);
      double acc = 0.0;
      for (int py = c.y0; py < c.y1; ++py)
        for (int px = c.x0; px < c.x1; ++px) acc += gray_at(image, px, py);
      y[cy * kStubSide + cx] = acc * c.inv_count;
    }
  const Eigen::VectorXd z = y.array() - y.mean();
  const double n = z.norm();
  if (n < 1e-12) return grad;  // degenerate branch is locally constant

  const Eigen::VectorXd e = z / n;
  Eigen::VectorXd gz = (dL_dE - e * e.dot(dL_dE)) / n;
  gz.array() -= gz.mean();

  const int nc = std::min(image.channels, 3);
  for (int cy = 0; cy < kStubSide; ++cy)
    for (int cx = 0; cx < kStubSide; ++cx) {
      const Cell c = stub_cell(image, cx, cy);
      const double g = gz[cy * kStubSide + cx] * c.inv_count / nc;
      for (int py = c.y0; py < c.y1; ++py)
        for (int px = c.x0; px < c.x1; ++px)
          for (int ch = 0; ch < nc; ++ch) grad.at(px, py, ch) += float(g);
    }
  return grad;
}

struct RemoteProvider::Impl {
  double timeout_s;
  int retries;
  std::string cache_dir;

  std::mutex mu;
  std::condition_variable cv;
  std::unordered_map<std::string, Eigen::VectorXd> cache;
  std::unordered_set<std::string> in_flight;
  int request_count = 0;

  std::string host;
  int port = 80;
};

RemoteProvider::RemoteProvider(std::string endpoint, double timeout_seconds, int retries,
                               std::string cache_dir)
    : endpoint_(std::move(endpoint)), impl_(new Impl) {
  impl_->timeout_s = timeout_seconds;
  impl_->retries = retries;
  impl_->cache_dir = std::move(cache_dir);

  std::string rest = endpoint_;
  const std::string prefix = "http://";
  if (rest.rfind(prefix, 0) == 0) rest = rest.substr(prefix.size());
  const auto slash = rest.find('/');
  if (slash != std::string::npos) rest = rest.substr(0, slash);
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    impl_->host = rest.substr(0, colon);
    impl_->port = std::stoi(rest.substr(colon + 1));
  } else {
    impl_->host = rest;
  }
  if (impl_->host.empty()) throw Error("remote provider endpoint is empty");
  if (!impl_->cache_dir.empty()) std::filesystem::create_directories(impl_->cache_dir);
}

RemoteProvider::~RemoteProvider() = default;

int RemoteProvider::request_count() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->request_count;
}

EmbeddingVector RemoteProvider::embed(const Image& image) {
  if (image.width < 1 || image.height < 1) throw Error("cannot embed an empty image");
  const std::vector<uint8_t> png = encode_png(image);
  const std::string key = sha256_hex(png.data(), png.size());

  {
    std::unique_lock<std::mutex> lock(impl_->mu);
    for (;;) {
      auto it = impl_->cache.find(key);
      if (it != impl_->cache.end()) return {it->second, id()};
      if (!impl_->in_flight.count(key)) break;
      impl_->cv.wait(lock);  // someone else is fetching this image
    }
    impl_->in_flight.insert(key);
  }

  auto release = [&](const Eigen::VectorXd* value) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    if (value) impl_->cache[key] = *value;
    impl_->in_flight.erase(key);
    impl_->cv.notify_all();
  };

  // Disk cache lookup.
  if (!impl_->cache_dir.empty()) {
    const std::string path = impl_->cache_dir + "/" + key + ".json";
    std::ifstream in(path);
    if (in) {
      try {
        nlohmann::json j = nlohmann::json::parse(in);
        const auto vals = j.at("embedding").get<std::vector<double>>();
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
        release(&v);
        return {v, id()};
      } catch (...) {
        // fall through to a network fetch on a corrupt cache entry
      }
    }
  }

  try {
    Eigen::VectorXd v = fetch(png);
    {
      std::lock_guard<std::mutex> lock(impl_->mu);
      if (dimension_ < 0) dimension_ = int(v.size());
    }
    release(&v);
    if (!impl_->cache_dir.empty()) {
      nlohmann::json j;
      j["embedding"] = std::vector<double>(v.data(), v.data() + v.size());
      std::ofstream out(impl_->cache_dir + "/" + key + ".json");
      out << j.dump();
    }
    return {v, id()};
  } catch (...) {
    release(nullptr);
    throw;
  }
}

Eigen::VectorXd RemoteProvider::fetch(const std::vector<uint8_t>& png_bytes) {
  ProviderError last(ProviderError::Kind::Timeout, "no attempt made");
  for (int attempt = 0; attempt <= impl_->retries; ++attempt) {
    if (attempt > 0) {
      const double backoff_s = 0.1 * double(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff_s));
    }
    try {
      httplib::Client client(impl_->host, impl_->port);
      const auto timeout = std::chrono::duration<double>(impl_->timeout_s);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      {
        std::lock_guard<std::mutex> lock(impl_->mu);
        ++impl_->request_count;
      }
      auto res = client.Post("/embed",
                             reinterpret_cast<const char*>(png_bytes.data()), png_bytes.size(),
                             "image/png");
      if (!res)
        throw ProviderError(ProviderError::Kind::Timeout,
                            "embedding request to " + endpoint_ + " failed: " +
                                httplib::to_string(res.error()));
      if (res->status != 200)
        throw ProviderError(ProviderError::Kind::HttpStatus,
                            "embedding service returned HTTP " + std::to_string(res->status));
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(ProviderError::Kind::Malformed,
                            std::string("embedding response is not JSON: ") + e.what());
      }
      if (!j.contains("embedding") || !j["embedding"].is_array())
        throw ProviderError(ProviderError::Kind::Malformed,
                            "embedding response lacks an \"embedding\" array");
      std::vector<double> vals;
      try {
        vals = j["embedding"].get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw ProviderError(ProviderError::Kind::Malformed,
                            "embedding array holds non-numeric entries");
      }
      if (vals.empty())
        throw ProviderError(ProviderError::Kind::Malformed, "embedding array is empty");
      {
        std::lock_guard<std::mutex> lock(impl_->mu);
        if (dimension_ > 0 && int(vals.size()) != dimension_)
          throw ProviderError(ProviderError::Kind::Malformed,
                              "embedding dimension changed from " + std::to_string(dimension_) +
                                  " to " + std::to_string(vals.size()));
      }
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
      const double n = v.norm();
      if (!(n > 0.0) || !v.allFinite())
        throw ProviderError(ProviderError::Kind::Malformed,
                            "embedding is zero or non-finite and cannot be normalized");
      return v / n;
    } catch (const ProviderError& e) {
      last = e;
    }
  }
  throw last;
}

}  // namespace garment
