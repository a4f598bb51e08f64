#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rag/rag_engine.hpp"
#include "rag/service.hpp"
#include "test_util.hpp"

namespace rag::testing {

/// Writes `n` small text documents plus a manifest; returns the manifest.
inline std::string write_corpus_files(const std::filesystem::path& dir, std::size_t n) {
  static const char* topics[] = {"shipping freight rates", "tariff schedules", "digital trade",
                                 "debt sustainability", "commodity prices", "foreign investment"};
  std::string manifest;
  for (std::size_t i = 0; i < n; ++i) {
    const auto name = "doc" + std::to_string(i) + ".txt";
    std::string text = "Report " + std::to_string(i) + " on " + topics[i % 6] + ".\n\n";
    for (int s = 0; s < 12; ++s) {
      text += std::string(topics[(i + static_cast<std::size_t>(s)) % 6]) + " item" +
              std::to_string(i * 100 + static_cast<std::size_t>(s)) + " ";
    }
    write_file(dir / name, text);
    manifest += "{\"id\":\"doc" + std::to_string(i) + "\",\"path\":\"" + name +
                "\",\"year\":" + std::to_string(2018 + i % 5) + "}\n";
  }
  return manifest;
}

/// Extractive output after a fixed delay, recording start/finish times.
class RecordingBackend final : public GenerationBackend {
 public:
  explicit RecordingBackend(std::chrono::milliseconds delay) : delay_(delay) {}

  std::string id() const override { return "recording"; }

  std::string generate(const PromptBundle& bundle, const TokenSink& on_token) override {
    const int now_running = ++running_;
    {
      std::lock_guard lock(mutex_);
      max_running_ = std::max(max_running_, now_running);
      starts_.push_back({bundle.query, std::chrono::steady_clock::now()});
    }
    std::this_thread::sleep_for(delay_);
    const auto text = ExtractiveBackend::render(bundle);
    if (on_token) {
      on_token(text);
    }
    --running_;
    return text;
  }

  int max_running() {
    std::lock_guard lock(mutex_);
    return max_running_;
  }
  std::vector<std::string> start_order() {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [q, t] : starts_) {
      out.push_back(q);
    }
    return out;
  }

 private:
  std::chrono::milliseconds delay_;
  std::atomic<int> running_{0};
  std::mutex mutex_;
  int max_running_ = 0;
  std::vector<std::pair<std::string, std::chrono::steady_clock::time_point>> starts_;
};

class FailingBackend final : public GenerationBackend {
 public:
  std::string id() const override { return "failing"; }
  std::string generate(const PromptBundle&, const TokenSink& on_token) override {
    if (on_token) {
      on_token("partial");
    }
    throw Error(ErrorCode::BackendUnavailable, "model server is down");
  }
};

inline ServiceConfig small_config(const std::filesystem::path& data_dir) {
  ServiceConfig config;
  config.data_dir = data_dir;
  config.embedder = EmbedderSpec{std::string(kReferenceEmbedderId), 256};
  config.chunk_params = ChunkParams{16, 4};
  return config;
}

}  // namespace rag::testing
