#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "biaseval/errors.hpp"

namespace biaseval {

inline constexpr std::string_view kTextPlaceholder = "{{text}}";

// Generic scoring-endpoint client configuration. The request body is the
// template with {{text}} substituted into its string values; the score is
// pulled from the response at a JSON pointer. No vendor shapes are baked in.
struct ScorerConfig {
  std::string endpoint_url;
  std::string model_name;
  nlohmann::json request_template = {{"text", "{{text}}"}};
  std::string response_score_path = "/score";
  double max_qps = 4.0;
  int max_retries = 3;
  std::optional<std::filesystem::path> cache_dir;
  std::string api_key_env;  // empty: endpoint needs no credential
  std::string api_key_header = "Authorization";
  int max_in_flight = 2;
  int retry_backoff_ms = 250;
};

inline void validate(const ScorerConfig& cfg) {
  if (cfg.endpoint_url.find("://") == std::string::npos) {
    throw InvalidSpec("endpoint_url must include a scheme, e.g. http://host:port/path");
  }
  if (cfg.model_name.empty()) throw InvalidSpec("model_name must be nonempty");
  if (cfg.response_score_path.empty()) {
    throw InvalidSpec("response_score_path must be a nonempty JSON pointer");
  }
  try {
    (void)nlohmann::json::json_pointer(cfg.response_score_path);
  } catch (const nlohmann::json::exception&) {
    throw InvalidSpec("response_score_path is not a valid JSON pointer: " +
                      cfg.response_score_path);
  }
  if (!(cfg.max_qps > 0.0)) throw InvalidSpec("max_qps must be > 0");
  if (cfg.max_retries < 0) throw InvalidSpec("max_retries must be >= 0");
  if (cfg.max_in_flight < 1) throw InvalidSpec("max_in_flight must be >= 1");
}

inline void to_json(nlohmann::json& j, const ScorerConfig& cfg) {
  j = {{"endpoint_url", cfg.endpoint_url},
       {"model_name", cfg.model_name},
       {"request_template", cfg.request_template},
       {"response_score_path", cfg.response_score_path},
       {"max_qps", cfg.max_qps},
       {"max_retries", cfg.max_retries},
       {"api_key_env", cfg.api_key_env},
       {"api_key_header", cfg.api_key_header},
       {"max_in_flight", cfg.max_in_flight},
       {"retry_backoff_ms", cfg.retry_backoff_ms}};
  j["cache_dir"] = cfg.cache_dir ? nlohmann::json(cfg.cache_dir->string()) : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, ScorerConfig& cfg) {
  cfg.endpoint_url = j.at("endpoint_url").get<std::string>();
  cfg.model_name = j.at("model_name").get<std::string>();
  if (j.contains("request_template")) cfg.request_template = j["request_template"];
  cfg.response_score_path = j.value("response_score_path", std::string("/score"));
  cfg.max_qps = j.value("max_qps", 4.0);
  cfg.max_retries = j.value("max_retries", 3);
  cfg.api_key_env = j.value("api_key_env", std::string());
  cfg.api_key_header = j.value("api_key_header", std::string("Authorization"));
  cfg.max_in_flight = j.value("max_in_flight", 2);
  cfg.retry_backoff_ms = j.value("retry_backoff_ms", 250);
  cfg.cache_dir.reset();
  if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
    cfg.cache_dir = std::filesystem::path(j["cache_dir"].get<std::string>());
  }
  validate(cfg);
}

inline ScorerConfig load_scorer_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open scorer config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("invalid scorer config JSON: ") + e.what());
  }
  return j.get<ScorerConfig>();
}

// FNV-1a 64-bit digest of the raw text bytes; the cache key together with
// the model name.
inline std::string text_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  return std::string(buf, 16);
}

struct ScoredText {
  std::string text_hash;
  std::string model_name;
  double score = 0.0;
  std::int64_t fetched_at = 0;  // unix seconds
};

struct ScoreBatchResult {
  std::vector<std::pair<std::string, double>> scores;          // input order, scored subset
  std::vector<std::pair<std::string, std::string>> failures;   // id -> error message
  std::size_t network_calls = 0;  // HTTP requests issued, retries included
  std::size_t cache_hits = 0;
};

namespace detail {

// Spaces request starts at least 1/qps apart; the first request goes
// immediately (one-token burst).
class RequestPacer {
 public:
  explicit RequestPacer(double qps) : interval_(1.0 / qps) {}

  void acquire() {
    std::chrono::steady_clock::time_point wake;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      wake = next_ > now ? next_ : now;
      next_ = wake + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(interval_));
    }
    std::this_thread::sleep_until(wake);
  }

 private:
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_ = std::chrono::steady_clock::now();
  double interval_;
};

// Append-only JSON-lines score cache, one file per model, deduplicated
// (last entry wins) and compacted when loaded.
class ScoreCache {
 public:
  ScoreCache(const std::filesystem::path& dir, const std::string& model) {
    std::filesystem::create_directories(dir);
    file_ = dir / (sanitize(model) + ".jsonl");
    bool needs_compaction = false;
    if (std::ifstream in(file_); in) {
      std::string line;
      std::size_t lines = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("h") || !j.contains("s")) {
          needs_compaction = true;  // drop corrupt tail lines from crashes
          continue;
        }
        entries_[j["h"].get<std::string>()] = j["s"].get<double>();
      }
      needs_compaction |= lines != entries_.size();
    }
    if (needs_compaction) {
      std::ofstream out(file_, std::ios::trunc);
      for (const auto& [h, s] : entries_) {
        out << nlohmann::json{{"h", h}, {"s", s}} << '\n';
      }
    }
    append_.open(file_, std::ios::app);
    if (!append_) throw IoError(file_.string(), "cannot open cache file for append");
  }

  std::optional<double> lookup(const std::string& hash) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& hash, double score) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_[hash] = score;
    append_ << nlohmann::json{{"h", hash}, {"s", score}, {"t", std::time(nullptr)}} << '\n';
    append_.flush();
  }

 private:
  static std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
      out.push_back(ok ? c : '_');
    }
    return out.empty() ? "model" : out;
  }

  std::filesystem::path file_;
  std::unordered_map<std::string, double> entries_;
  std::ofstream append_;
  std::mutex mu_;
};

inline nlohmann::json instantiate_template(const nlohmann::json& node, const std::string& text) {
  if (node.is_string()) {
    std::string s = node.get<std::string>();
    std::size_t pos = 0;
    while ((pos = s.find(kTextPlaceholder, pos)) != std::string::npos) {
      s.replace(pos, kTextPlaceholder.size(), text);
      pos += text.size();
    }
    return s;
  }
  if (node.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : node.items()) out[k] = instantiate_template(v, text);
    return out;
  }
  if (node.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : node) out.push_back(instantiate_template(v, text));
    return out;
  }
  return node;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidSpec("malformed endpoint URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

// Scores a batch of texts. Each distinct text is fetched at most once per
// (model, text hash): duplicates within the batch share one request and the
// optional cache persists scores across runs. Transient failures (connection
// errors, 429, 5xx) retry with exponential backoff; per-text errors end up
// in the failure manifest rather than aborting the batch.
inline ScoreBatchResult score_batch(
    std::span<const std::pair<std::string, std::string>> texts, const ScorerConfig& cfg) {
  validate(cfg);

  std::string api_key;
  if (!cfg.api_key_env.empty()) {
    const char* value = std::getenv(cfg.api_key_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw AuthError("environment variable " + cfg.api_key_env + " is not set");
    }
    api_key = value;
  }

  std::optional<detail::ScoreCache> cache;
  if (cfg.cache_dir) cache.emplace(*cfg.cache_dir, cfg.model_name);

  // Unique hashes, first-seen order; every index maps to its hash slot.
  std::unordered_map<std::string, std::size_t> slot_of_hash;
  std::vector<std::size_t> fetch_slot(texts.size());
  std::vector<const std::string*> slot_text;
  std::vector<std::string> slot_hash;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::string hash = text_hash(texts[i].second);
    const auto [it, inserted] = slot_of_hash.emplace(std::move(hash), slot_text.size());
    if (inserted) {
      slot_text.push_back(&texts[i].second);
      slot_hash.push_back(it->first);
    }
    fetch_slot[i] = it->second;
  }

  struct SlotResult {
    std::optional<double> score;
    std::string error;
  };
  std::vector<SlotResult> slots(slot_text.size());

  ScoreBatchResult result;
  std::atomic<std::size_t> network_calls{0};
  std::atomic<std::size_t> cache_hits{0};

  const detail::ParsedUrl url = detail::parse_url(cfg.endpoint_url);
  detail::RequestPacer pacer(cfg.max_qps);

  auto fetch_one = [&](httplib::Client& client, std::size_t slot) {
    const std::string& text = *slot_text[slot];
    const std::string& hash = slot_hash[slot];

    if (cache) {
      if (const auto hit = cache->lookup(hash)) {
        slots[slot].score = *hit;
        cache_hits.fetch_add(1);
        return;
      }
    }

    const std::string body = detail::instantiate_template(cfg.request_template, text).dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      if (attempt > 0) {
        const int delay = cfg.retry_backoff_ms * (1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(std::min(delay, 8000)));
      }
      pacer.acquire();
      network_calls.fetch_add(1);
      const httplib::Result res = client.Post(url.path, body, "application/json");
      if (!res) {
        last_error = "ConnectionError: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429) {
        last_error = "RateLimited: endpoint returned 429";
        continue;
      }
      if (res->status >= 500) {
        last_error = "HttpError: status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        slots[slot].error = "HttpError: status " + std::to_string(res->status);
        return;
      }
      const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        slots[slot].error = "SchemaError: response is not valid JSON";
        return;
      }
      const nlohmann::json::json_pointer pointer(cfg.response_score_path);
      if (!parsed.contains(pointer) || !parsed.at(pointer).is_number()) {
        slots[slot].error =
            "SchemaError: no numeric score at " + cfg.response_score_path;
        return;
      }
      const double score = parsed.at(pointer).get<double>();
      if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
        slots[slot].error = "SchemaError: score " + std::to_string(score) +
                            " outside [0, 1] is not clamped";
        return;
      }
      slots[slot].score = score;
      if (cache) cache->store(hash, score);
      return;
    }
    slots[slot].error = last_error + " (after " + std::to_string(cfg.max_retries) + " retries)";
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), slots.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    httplib::Client client(url.base);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    if (!api_key.empty()) {
      client.set_default_headers({{cfg.api_key_header, api_key}});
    }
    for (std::size_t slot = cursor.fetch_add(1); slot < slots.size();
         slot = cursor.fetch_add(1)) {
      fetch_one(client, slot);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < texts.size(); ++i) {
    const SlotResult& slot = slots[fetch_slot[i]];
    if (slot.score) {
      result.scores.emplace_back(texts[i].first, *slot.score);
    } else {
      result.failures.emplace_back(texts[i].first, slot.error);
    }
  }
  result.network_calls = network_calls.load();
  result.cache_hits = cache_hits.load();
  return result;
}

}  // namespace biaseval
