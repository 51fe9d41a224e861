// Eigen first: <resolv.h> (pulled in by httplib) defines a `_res` macro.
#include "cts/encoder.hpp"
#include "cts/error.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace cts {

using nlohmann::json;

HttpEncoderBackend::HttpEncoderBackend(std::string base_url, std::chrono::seconds timeout,
                                       std::string model_name)
    : url_(std::move(base_url)), timeout_(timeout), model_name_(std::move(model_name)) {
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos)
    throw ArgumentError("embedding URL must include a scheme: '" + url_ + "'");
  const auto path_start = url_.find('/', scheme_end + 3);
  scheme_host_port_ = url_.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url_.substr(path_start);
}

std::string HttpEncoderBackend::descriptor() const {
  return model_name_.empty() ? "http:" + url_ : "http:" + url_ + "#" + model_name_;
}

std::vector<std::vector<float>> HttpEncoderBackend::embed(std::span<const std::string> texts) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  json request;
  request["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const auto res = client.Post(path_prefix_ + "/embed", request.dump(), "application/json");
  if (!res)
    throw TransportError("POST " + url_ + "/embed failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("POST " + url_ + "/embed returned HTTP " + std::to_string(res->status));

  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("malformed embedding response: ") + e.what());
  }
  try {
    const auto dim = body.at("dim").get<std::size_t>();
    auto vectors = body.at("embeddings").get<std::vector<std::vector<float>>>();
    if (vectors.size() != texts.size())
      throw IntegrityError("embedding response: " + std::to_string(vectors.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
    for (const auto& v : vectors) {
      if (v.size() != dim)
        throw IntegrityError("embedding response: vector width " + std::to_string(v.size()) +
                             " != declared dim " + std::to_string(dim));
    }
    return vectors;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed embedding response: ") + e.what());
  }
}

}  // namespace cts
