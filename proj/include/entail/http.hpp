#pragma once

// Clients for the inference service.
//
//   POST /score   {"pairs":[{"premise":"...","hypothesis":"..."},...]}
//              -> {"scores":[{"entailment":float,"not_entailment":float},...]}
//   POST /embed   {"texts":["...",...]} -> {"embeddings":[[float,...],...]}
//   GET  /health  -> {"status":"ok","model":"..."}
//
// Arrays in responses are index-aligned with the request.

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <utility>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "backend.hpp"
#include "features.hpp"

#include <httplib.h>

namespace entail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;

  static Endpoint parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0)
      throw UsageError("endpoint must be an http:// URL, got \"" + url + "\"");
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) e.base_path = url.substr(path_start);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
    return e;
  }

  std::string path(std::string_view route) const { return base_path + std::string(route); }
};

namespace detail {

inline std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto cli = std::make_unique<httplib::Client>(ep.origin);
  const auto sec = timeout.count() / 1000;
  const auto usec = (timeout.count() % 1000) * 1000;
  cli->set_connection_timeout(sec, usec);
  cli->set_read_timeout(sec, usec);
  cli->set_write_timeout(sec, usec);
  return cli;
}

// POSTs `body`, retrying transport failures. Non-200 answers are not retried.
inline json post_json(const Endpoint& ep, std::string_view route, const json& body, std::chrono::milliseconds timeout,
                      int retries, std::atomic<std::size_t>* calls) {
  const auto path = ep.path(route);
  const auto payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    auto cli = make_client(ep, timeout);
    if (calls) ++*calls;
    auto res = cli->Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200)
      throw HttpStatusError(res->status, "POST " + ep.origin + path + " returned HTTP " + std::to_string(res->status) +
                                             (res->body.empty() ? "" : ": " + res->body));
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError("POST " + ep.origin + path + " returned malformed JSON: " + e.what());
    }
  }
  throw TransportError("POST " + ep.origin + path + " failed after " + std::to_string(retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace detail

class HttpBackend final : public ScoringBackend {
 public:
  HttpBackend(const std::string& endpoint_url, std::size_t batch_size = 32,
              std::chrono::milliseconds timeout = std::chrono::seconds(60), int retries = 2)
      : endpoint_(Endpoint::parse(endpoint_url)), batch_size_(batch_size), timeout_(timeout), retries_(retries) {}

  std::vector<PairScore> score(std::span<const TextPair> pairs) override {
    json body;
    body["pairs"] = json::array();
    for (const auto& p : pairs) body["pairs"].push_back({{"premise", p.premise}, {"hypothesis", p.hypothesis}});
    const json res = detail::post_json(endpoint_, "/score", body, timeout_, retries_, &calls_);

    const auto bad = [&](const std::string& why) {
      return ProtocolError("POST " + endpoint_.origin + endpoint_.path("/score") + ": " + why);
    };
    if (!res.is_object() || !res.contains("scores") || !res["scores"].is_array()) throw bad("missing \"scores\" array");
    const auto& scores = res["scores"];
    if (scores.size() != pairs.size())
      throw LengthMismatchError("POST " + endpoint_.origin + endpoint_.path("/score") + " returned " +
                                std::to_string(scores.size()) + " scores for " + std::to_string(pairs.size()) +
                                " pairs");
    std::vector<PairScore> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
      if (!s.is_object() || !s.contains("entailment") || !s.contains("not_entailment") ||
          !s["entailment"].is_number() || !s["not_entailment"].is_number())
        throw bad("score entries need numeric \"entailment\" and \"not_entailment\"");
      out.push_back({s["entailment"].get<double>(), s["not_entailment"].get<double>()});
    }
    return out;
  }

  BackendCaps caps() const override { return {batch_size_, true}; }
  std::string identity() const override { return endpoint_.origin + endpoint_.base_path; }

  json health() const {
    auto cli = detail::make_client(endpoint_, timeout_);
    auto res = cli->Get(endpoint_.path("/health"));
    if (!res) throw TransportError("GET /health failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw HttpStatusError(res->status, "GET /health returned HTTP " + std::to_string(res->status));
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("GET /health returned malformed JSON: ") + e.what());
    }
  }

  // HTTP requests issued so far, retries included.
  std::size_t calls() const { return calls_.load(); }

 private:
  Endpoint endpoint_;
  std::size_t batch_size_;
  std::chrono::milliseconds timeout_;
  int retries_;
  std::atomic<std::size_t> calls_{0};
};

// Sentence embeddings from the inference service.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(const std::string& endpoint_url, std::chrono::milliseconds timeout = std::chrono::seconds(120),
                        int retries = 2)
      : endpoint_(Endpoint::parse(endpoint_url)), timeout_(timeout), retries_(retries) {}

  FeatureMatrix embed(const std::vector<std::string>& texts) const override {
    if (texts.empty()) throw UsageError("embed: no texts");
    const json res = detail::post_json(endpoint_, "/embed", json{{"texts", texts}}, timeout_, retries_, nullptr);
    const auto bad = [&](const std::string& why) { return ProtocolError("POST /embed: " + why); };
    if (!res.is_object() || !res.contains("embeddings") || !res["embeddings"].is_array())
      throw bad("missing \"embeddings\" array");
    const auto& rows = res["embeddings"];
    if (rows.size() != texts.size())
      throw LengthMismatchError("POST /embed returned " + std::to_string(rows.size()) + " rows for " +
                                std::to_string(texts.size()) + " texts");
    if (rows.empty() || !rows[0].is_array() || rows[0].empty()) throw bad("empty embedding rows");
    const auto d = rows[0].size();
    FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != d) throw bad("ragged embedding rows");
      for (std::size_t j = 0; j < d; ++j) {
        if (!rows[i][j].is_number()) throw bad("non-numeric embedding value");
        const double v = rows[i][j].get<double>();
        if (!std::isfinite(v)) throw bad("non-finite embedding value");
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    return out;
  }

  std::string identity() const override { return endpoint_.origin + endpoint_.base_path + "/embed"; }

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  int retries_;
};

}  // namespace entail
