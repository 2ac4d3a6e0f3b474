#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "fake_server.hpp"

#include <thread>

#include <httplib.h>

namespace xchan::testing {

struct FakeServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

FakeServer::FakeServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  impl_->server.Post(".*", [this, handler](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      return;
    }
    const auto reply = handler(req.path, req.get_header_value("Authorization"), body);
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

FakeServer::~FakeServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string FakeServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1"; }

}  // namespace xchan::testing
