#include "rag/rag_engine.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rag/chunker.hpp"
#include "rag/errors.hpp"
#include "rag/url.hpp"

namespace rag {
namespace {

constexpr std::string_view kSystemInstruction =
    "You answer questions using only the source passages supplied with the question. "
    "Cite the tag of every passage you rely on. If the passages do not contain the answer, "
    "say that you do not know.";

// "Sources:" and "Question:" in render_messages().
constexpr std::size_t kFramingTokens = 2;

// Splits text into streaming deltas: each delta is a run of separators
// followed by one word, so the deltas concatenate back to the input.
std::vector<std::string_view> split_deltas(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n')) {
      ++i;
    }
    while (i < text.size() && text[i] != ' ' && text[i] != '\n') {
      ++i;
    }
    out.push_back(text.substr(start, i - start));
    start = i;
  }
  return out;
}

}  // namespace

void validate(const PromptBudget& budget) {
  if (budget.context_window == 0 || budget.answer_reserve == 0 ||
      budget.answer_reserve + budget.template_cost >= budget.context_window) {
    throw Error(ErrorCode::InvalidBudget,
                "need answer_reserve (" + std::to_string(budget.answer_reserve) + ") + template_cost (" +
                    std::to_string(budget.template_cost) + ") < context_window (" +
                    std::to_string(budget.context_window) + ")");
  }
}

std::string_view default_system_instruction() { return kSystemInstruction; }

PromptBudget default_budget(std::size_t context_window, std::size_t answer_reserve) {
  PromptBudget budget;
  budget.context_window = context_window;
  budget.answer_reserve = answer_reserve;
  budget.template_cost = count_tokens(kSystemInstruction) + kFramingTokens;
  return budget;
}

std::vector<RetrievalHit> retrieve(const VectorStore& store, std::string_view query_text,
                                   const RetrievalParams& params, Embedder& embedder) {
  if (embedder.spec() != store.meta().embedder) {
    throw Error(ErrorCode::EmbedderMismatch,
                "store built with '" + store.meta().embedder.id + "'/" +
                    std::to_string(store.meta().embedder.dim) + ", query embedder is '" +
                    embedder.spec().id + "'/" + std::to_string(embedder.spec().dim));
  }
  if (params.top_n == 0) {
    throw Error(ErrorCode::InvalidParams, "top_n must be >= 1");
  }
  const auto query = embedder.embed_text(query_text);
  auto hits = params.use_ann ? store.search_ann(query, params.top_n, params.ef_search, params.filter)
                             : store.search_flat(query, params.top_n, params.filter);
  std::erase_if(hits, [&](const RetrievalHit& h) { return h.score < params.min_score; });
  return hits;
}

PromptBundle assemble_prompt(std::span<const RetrievalHit> hits, std::string_view query,
                             const PromptBudget& budget, std::string system_instruction) {
  validate(budget);
  const auto limit = budget.context_window - budget.answer_reserve;
  const auto base = budget.template_cost + count_tokens(query);
  if (base > limit) {
    throw Error(ErrorCode::QueryTooLarge, "template + query need " + std::to_string(base) +
                                              " tokens, budget is " + std::to_string(limit));
  }

  PromptBundle bundle;
  bundle.system_instruction = std::move(system_instruction);
  bundle.query = std::string(query);
  bundle.total_tokens = base;
  for (const auto& hit : hits) {
    const auto cost = count_tokens(hit.chunk.text) + budget.separator_cost;
    if (bundle.total_tokens + cost <= limit) {
      bundle.total_tokens += cost;
      bundle.included_hits.push_back(hit);
    }
  }
  return bundle;
}

std::string source_tag(const Chunk& chunk) {
  return chunk.doc_id + "#" + std::to_string(chunk.index);
}

std::vector<ChatMessage> render_messages(const PromptBundle& bundle) {
  std::string user = "Sources:\n";
  for (const auto& hit : bundle.included_hits) {
    user += "<<<SOURCE " + source_tag(hit.chunk) + ">>>\n";
    user += hit.chunk.text;
    user += "\n<<<END SOURCE>>>\n";
  }
  user += "Question: ";
  user += bundle.query;
  return {{"system", bundle.system_instruction}, {"user", std::move(user)}};
}

std::string ExtractiveBackend::render(const PromptBundle& bundle) {
  std::string out =
      "Based on " + std::to_string(bundle.included_hits.size()) + " retrieved passage(s):";
  for (const auto& hit : bundle.included_hits) {
    const auto tokens = tokenize(hit.chunk.text);
    out += "\n[" + source_tag(hit.chunk) + "] ";
    out += join_tokens(tokens, 0, std::min(tokens.size(), kExcerptTokens));
  }
  return out;
}

std::string ExtractiveBackend::generate(const PromptBundle& bundle, const TokenSink& on_token) {
  if (delay_.count() > 0) {
    std::this_thread::sleep_for(delay_);
  }
  auto text = render(bundle);
  if (on_token) {
    for (const auto delta : split_deltas(text)) {
      on_token(delta);
    }
  }
  return text;
}

RemoteChatBackend::RemoteChatBackend(RemoteBackendConfig config) : config_(std::move(config)) {
  parse_http_url(config_.endpoint);
}

std::optional<std::string> parse_stream_delta(std::string_view json_payload) {
  const auto event = nlohmann::json::parse(json_payload, nullptr, false);
  if (event.is_discarded() || !event.is_object()) {
    return std::nullopt;
  }
  if (const auto choices = event.find("choices"); choices != event.end() && choices->is_array() &&
                                                  !choices->empty()) {
    const auto& choice = choices->front();
    if (const auto delta = choice.find("delta"); delta != choice.end() && delta->is_object()) {
      if (const auto content = delta->find("content"); content != delta->end() && content->is_string()) {
        return content->get<std::string>();
      }
      return std::nullopt;
    }
    if (const auto text = choice.find("text"); text != choice.end() && text->is_string()) {
      return text->get<std::string>();
    }
    return std::nullopt;
  }
  for (const char* key : {"token", "content", "delta"}) {
    if (const auto it = event.find(key); it != event.end() && it->is_string()) {
      return it->get<std::string>();
    }
  }
  return std::nullopt;
}

std::string RemoteChatBackend::generate(const PromptBundle& bundle, const TokenSink& on_token) {
  const auto url = parse_http_url(config_.endpoint);
  auto messages = nlohmann::json::array();
  for (const auto& m : render_messages(bundle)) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  const nlohmann::json body{{"model", config_.model}, {"messages", messages}, {"stream", true}};

  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  if (config_.bearer_token) {
    client.set_bearer_token_auth(*config_.bearer_token);
  }

  const auto started = std::chrono::steady_clock::now();
  const auto deadline = started + config_.timeout;
  std::string answer;
  std::string pending;
  bool finished = false;
  bool timed_out = false;
  int status = 0;

  const auto handle_line = [&](std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.starts_with("data:")) {
      line.remove_prefix(5);
      if (line.starts_with(' ')) {
        line.remove_prefix(1);
      }
    } else if (!line.starts_with('{')) {
      return;  // event:, id:, comments, blank separators
    }
    if (line == "[DONE]") {
      finished = true;
      return;
    }
    if (auto delta = parse_stream_delta(line); delta && !delta->empty()) {
      answer += *delta;
      if (on_token) {
        on_token(*delta);
      }
    }
  };

  httplib::Request req;
  req.method = "POST";
  req.path = url.path;
  req.body = body.dump();
  req.set_header("Content-Type", "application/json");
  req.set_header("Accept", "text/event-stream");
  req.response_handler = [&](const httplib::Response& res) {
    status = res.status;
    return res.status == 200;
  };
  req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
    pending.append(data, len);
    std::size_t nl;
    while (!finished && (nl = pending.find('\n')) != std::string::npos) {
      handle_line(std::string_view(pending).substr(0, nl));
      pending.erase(0, nl + 1);
    }
    if (std::chrono::steady_clock::now() > deadline) {
      timed_out = true;
      return false;
    }
    return !finished;
  };

  const auto res = client.send(req);
  if (!finished && !pending.empty()) {
    handle_line(pending);
  }
  if (timed_out) {
    throw Error(ErrorCode::GenerationTimeout, config_.endpoint);
  }
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Canceled && (finished || status == 200)) {
      return answer;  // we stopped reading after [DONE]
    }
    if (err == httplib::Error::Read || err == httplib::Error::Write) {
      // A read timeout is the socket-level form of the same deadline.
      if (std::chrono::steady_clock::now() - started >= config_.timeout * 95 / 100) {
        throw Error(ErrorCode::GenerationTimeout, config_.endpoint);
      }
    }
    if (status != 0 && status != 200) {
      throw Error(ErrorCode::BackendUnavailable, config_.endpoint + ": HTTP " + std::to_string(status));
    }
    throw Error(ErrorCode::BackendUnavailable, config_.endpoint + ": " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable, config_.endpoint + ": HTTP " + std::to_string(res->status));
  }
  return answer;
}

Answer generate(const PromptBundle& bundle, GenerationBackend& backend, const TokenSink& on_token) {
  Answer answer;
  answer.text = backend.generate(bundle, on_token);
  answer.sources = bundle.included_hits;
  answer.backend_id = backend.id();
  return answer;
}

Answer answer_query(const VectorStore& store, std::string_view query_text,
                    const RetrievalParams& params, const PromptBudget& budget, Embedder& embedder,
                    GenerationBackend& backend, const TokenSink& on_token) {
  const auto hits = retrieve(store, query_text, params, embedder);
  const auto bundle = assemble_prompt(hits, query_text, budget);
  return generate(bundle, backend, on_token);
}

}  // namespace rag
