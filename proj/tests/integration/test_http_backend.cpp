#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "cts/encoder.hpp"
#include "cts/error.hpp"
#include "synthetic.hpp"

// after the cts headers: <resolv.h> defines _res, which collides with Eigen
#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace cts;
using nlohmann::json;

namespace {

// Local embedding service whose reply is chosen per test.
class FakeService {
 public:
  explicit FakeService(std::function<void(const json&, httplib::Response&)> reply) {
    server_.Post("/v1/embed", [reply, this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      reply(json::parse(req.body), res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

void reply_vectors(const json& req, httplib::Response& res, std::size_t dim) {
  json out{{"dim", dim}, {"embeddings", json::array()}};
  for (const auto& t : req.at("texts"))
    out["embeddings"].push_back(test::FakeBackend::vector_for(t.get<std::string>(), dim));
  res.set_content(out.dump(), "application/json");
}

}  // namespace

TEST(HttpBackend, EmbedsInOrder) {
  FakeService svc([](const json& req, httplib::Response& res) { reply_vectors(req, res, 6); });
  HttpEncoderBackend backend(svc.url(), std::chrono::seconds(5), "toy-model");
  const std::vector<std::string> texts{"flood warning", "bridge closed", "flood warning"};
  const auto v = backend.embed(texts);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], test::FakeBackend::vector_for("flood warning", 6));
  EXPECT_EQ(v[1], test::FakeBackend::vector_for("bridge closed", 6));
  EXPECT_NE(backend.descriptor().find("toy-model"), std::string::npos);
}

TEST(HttpBackend, ServerErrorIsTransportError) {
  FakeService svc([](const json&, httplib::Response& res) { res.status = 500; });
  HttpEncoderBackend backend(svc.url(), std::chrono::seconds(5));
  const std::vector<std::string> texts{"a"};
  try {
    backend.embed(texts);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("500"), std::string::npos);
  }
}

TEST(HttpBackend, MalformedBodyIsTransportError) {
  FakeService svc([](const json&, httplib::Response& res) { res.set_content("{not json", "application/json"); });
  HttpEncoderBackend backend(svc.url(), std::chrono::seconds(5));
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(backend.embed(texts), TransportError);
}

TEST(HttpBackend, WidthOrCountMismatchIsIntegrityError) {
  FakeService bad_width([](const json&, httplib::Response& res) {
    res.set_content(R"({"dim": 3, "embeddings": [[1, 2]]})", "application/json");
  });
  const std::vector<std::string> one{"a"}, two{"a", "b"};
  EXPECT_THROW(HttpEncoderBackend(bad_width.url()).embed(one), IntegrityError);
  FakeService short_reply([](const json&, httplib::Response& res) {
    res.set_content(R"({"dim": 2, "embeddings": [[1, 2]]})", "application/json");
  });
  EXPECT_THROW(HttpEncoderBackend(short_reply.url()).embed(two), IntegrityError);
}

TEST(HttpBackend, UnreachableServiceAndBadUrl) {
  HttpEncoderBackend backend("http://127.0.0.1:1", std::chrono::seconds(2));
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(backend.embed(texts), TransportError);
  EXPECT_THROW(HttpEncoderBackend("localhost:8080"), ArgumentError);
}

TEST(HttpBackend, DrivesEmbedCorpusWithRetries) {
  std::atomic<int> calls{0};
  FakeService svc([&](const json& req, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    reply_vectors(req, res, 4);
  });
  HttpEncoderBackend backend(svc.url(), std::chrono::seconds(5));
  const auto corpus = test::corpus_from_labels({{0}, {1}, {0}}, TaskKind::multi_class, 2);
  EmbeddingCache cache;
  EmbedOptions opt;
  opt.expected_dim = 4;
  opt.retry.initial_backoff = std::chrono::milliseconds(1);
  const auto m = embed_corpus(backend, corpus, opt, cache);
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(svc.hits(), 2);
}
