#pragma once

// Generator that POSTs requests to an HTTP endpoint, e.g.
// "http://127.0.0.1:8080" (path defaults to /generate) or
// "http://model-host:9000/v1/generate".

#include <chrono>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pcqa/errors.hpp"
#include "pcqa/orchestrator.hpp"

namespace pcqa {

struct HttpGeneratorOptions {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds connect_timeout{5};
  std::chrono::seconds read_timeout{300};
};

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(const std::string& endpoint, HttpGeneratorOptions options = {}) : options_(options) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos || endpoint.substr(0, scheme) != "http")
      throw std::invalid_argument("endpoint must start with http://, got '" + endpoint + "'");
    const auto path = endpoint.find('/', scheme + 3);
    base_ = path == std::string::npos ? endpoint : endpoint.substr(0, path);
    path_ = path == std::string::npos || path + 1 == endpoint.size() ? "/generate" : endpoint.substr(path);
    if (base_.size() == scheme + 3) throw std::invalid_argument("endpoint has no host: '" + endpoint + "'");
    if (options_.attempts < 1) throw std::invalid_argument("attempts must be at least 1");
  }

  // Retries connection failures and 5xx responses with exponential backoff.
  GenerationResponse generate(const GenerationRequest& request) override {
    const std::string body = request_to_json(request).dump();
    std::string last_error;
    auto backoff = options_.initial_backoff;
    for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
      httplib::Client client(base_);
      client.set_connection_timeout(options_.connect_timeout);
      client.set_read_timeout(options_.read_timeout);
      auto res = client.Post(path_, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
      } else if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else if (res->status != 200) {
        throw TransportError(base_ + path_ + " answered HTTP " + std::to_string(res->status) + ": " + res->body);
      } else {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
          throw ContractViolation(std::string("response is not JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("outputs")) throw ContractViolation("response has no \"outputs\"");
        GenerationResponse response{outputs_from_json(j["outputs"])};
        check_output_count(request, response);
        return response;
      }
      if (attempt < options_.attempts) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
    }
    throw TransportError(base_ + path_ + " failed after " + std::to_string(options_.attempts) +
                         " attempts: " + last_error);
  }

 private:
  HttpGeneratorOptions options_;
  std::string base_;
  std::string path_;
};

}  // namespace pcqa
