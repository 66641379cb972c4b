#include <httplib.h>

#include <cstdlib>
#include <filesystem>

#include "dynaslide/agent.hpp"
#include "dynaslide/digest.hpp"

namespace dynaslide {

std::string request_digest(Task t, const Json& input) {
  return sha256_hex(canonical_dump(Json{{"task", to_string(t)}, {"input", input}}));
}

// ---------------------------------------------------------------------------
// Oracle

OracleProvider::OracleProvider(const TemplatePack& pack, SlideMetadata gold, double jitter)
    : pack_(pack), gold_(std::move(gold)), jitter_(jitter) {}

Json OracleProvider::call(Task t, const Json& input) {
  try {
    switch (t) {
      case Task::layout_parse: {
        const std::string digest = request_digest(t, input);
        Rng rng(std::stoull(digest.substr(0, 16), nullptr, 16));
        auto shift = [&](int extent) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          return static_cast<int>(std::lround((2.0 * u - 1.0) * jitter_ * extent));
        };
        std::vector<LayoutPrediction> out;
        for (const auto& slot : gold_.template_slide) {
          Rect r = slot.layout;
          const int dx = shift(r.width), dy = shift(r.height), dw = shift(r.width), dh = shift(r.height);
          r.x = std::clamp(r.x + dx, 0, kCanvasWidth - 1);
          r.y = std::clamp(r.y + dy, 0, kCanvasHeight - 1);
          r.width = std::clamp(r.width + dw, 1, kCanvasWidth - r.x);
          r.height = std::clamp(r.height + dh, 1, kCanvasHeight - r.y);
          out.push_back({slot.role, r, 1.0});
        }
        return to_json(out);
      }
      case Task::data_source_extract: {
        const ParameterState s = state_from_filters(gold_.slide_filters, LogicMode::closed);
        return {{"table_name", s.table_name}, {"slots", to_json(s.slots)}};
      }
      case Task::logic_closed:
        return to_json(state_from_filters(gold_.slide_filters, LogicMode::closed).logic);
      case Task::logic_open:
        return to_json(std::get<OpenLogic>(state_from_filters(gold_.slide_filters, LogicMode::open).logic));
      case Task::instruction_parse: {
        if (!gold_.query_filters) throw Error(ErrorKind::ProviderError, "gold metadata has no query_filters");
        const ParameterState current = parameter_state_from_json(input.at("state"));
        return to_json(apply_query_filters(current, *gold_.query_filters));
      }
      case Task::sql_generate: {
        const CompiledSql sql = compile_sql(query_for_state(parameter_state_from_json(input.at("state"))));
        Json params = Json::array();
        for (const auto& p : sql.params) std::visit([&](const auto& v) { params.push_back(v); }, p);
        return {{"sql", sql.text}, {"params", params}};
      }
      case Task::summary_rewrite: {
        const TemplateSlot* slot = nullptr;
        for (const auto& s : gold_.template_slide) {
          if (s.role == Role::summary) slot = &s;
        }
        if (!slot) throw Error(ErrorKind::ProviderError, "gold layout has no summary");
        auto values = text_values(pack_, parameter_state_from_json(input.at("state")));
        for (const auto& [k, v] : input.at("metrics").items()) values[k] = v.get<std::string>();
        return {{"text", instantiate_text(pack_.text_template(slot->template_id), values)}};
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ProviderError) throw;
    throw Error(ErrorKind::ProviderError, std::string("oracle: ") + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ProviderError, std::string("oracle: ") + e.what());
  }
  throw Error(ErrorKind::ProviderError, "oracle: unsupported task");
}

// ---------------------------------------------------------------------------
// Replay / recording

ReplayProvider::ReplayProvider(std::string dir) : dir_(std::move(dir)) {}

Json ReplayProvider::call(Task t, const Json& input) {
  const std::string path = (std::filesystem::path(dir_) / (request_digest(t, input) + ".json")).string();
  try {
    return read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ProviderError, "replay: no fixture for " + std::string(to_string(t)) + " (" + e.what() + ")");
  }
}

RecordingProvider::RecordingProvider(ModelProvider& inner, std::string dir) : inner_(inner), dir_(std::move(dir)) {}

Json RecordingProvider::call(Task t, const Json& input) {
  Json r = inner_.call(t, input);
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir_);
  write_text_file((std::filesystem::path(dir_) / (request_digest(t, input) + ".json")).string(), r.dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------------------
// Remote

RemoteConfig remote_config_from_env() {
  RemoteConfig cfg;
  if (const char* url = std::getenv("DYNASLIDE_MODEL_URL")) cfg.base_url = url;
  if (const char* key = std::getenv("DYNASLIDE_MODEL_KEY")) cfg.api_key = key;
  return cfg;
}

Json extract_fenced_json(std::string_view text) {
  std::string_view body = text;
  const auto open = text.find("```");
  if (open != std::string_view::npos) {
    auto start = text.find('\n', open);
    const auto close = start == std::string_view::npos ? start : text.find("```", start + 1);
    if (start == std::string_view::npos || close == std::string_view::npos) {
      throw Error(ErrorKind::ParseError, "unterminated fenced block");
    }
    body = text.substr(start + 1, close - start - 1);
  }
  return parse_json_text(body);
}

RemoteProvider::RemoteProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw Error(ErrorKind::InvalidConfig, "DYNASLIDE_MODEL_URL is not set");
}

namespace {

Json parse_reply(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception&) {
    return extract_fenced_json(body);
  }
  // Chat-completions replies and {content: "..."} wrappers carry the answer as text.
  if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    return extract_fenced_json(j["choices"][0].at("message").at("content").get<std::string>());
  }
  if (j.is_object() && j.size() == 1 && j.contains("content") && j["content"].is_string()) {
    return extract_fenced_json(j["content"].get<std::string>());
  }
  return j;
}

}  // namespace

Json RemoteProvider::call(Task t, const Json& input) {
  const auto scheme = cfg_.base_url.find("://");
  const auto slash = cfg_.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string host = cfg_.base_url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : cfg_.base_url.substr(slash);
  httplib::Client client(host);
  client.set_connection_timeout(cfg_.timeout_seconds);
  client.set_read_timeout(cfg_.timeout_seconds);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  const std::string payload =
      Json{{"task", to_string(t)}, {"input", input}, {"schema", response_schema(t)}}.dump();

  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return parse_reply(res->body);
    } catch (const std::exception& e) {
      last_error = std::string("unparseable reply: ") + e.what();
    }
  }
  throw Error(ErrorKind::ProviderError, "remote " + std::string(to_string(t)) + ": " + last_error);
}

}  // namespace dynaslide
