#pragma once

// Local chat-completions stand-in on an ephemeral port, for exercising the
// remote recognizer without a network.

#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace testing_support {

class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// Chat-completions body whose single message carries `content`.
inline std::string completion(const std::string& content) {
  nlohmann::json body;
  body["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  return body.dump();
}

// A port with nothing listening on it.
inline int closed_port() {
  httplib::Server probe;
  return probe.bind_to_any_port("127.0.0.1");
}

}  // namespace testing_support
