#pragma once

// WebSocket endpoint (any path) plus `GET /status` on the same port. Each
// connection is served on its own thread with blocking I/O.

#include <exflow/server/session.hpp>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace exflow::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

class WsServer {
 public:
  explicit WsServer(ServerConfig cfg) : state_(std::make_shared<ServerState>(std::move(cfg))) {}
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;
  ~WsServer() { stop(); }

  /// Binds and starts accepting. Port 0 picks a free port; the bound port is
  /// returned. Throws if the address cannot be bound.
  unsigned short start(const std::string& address = "127.0.0.1", unsigned short port = 0) {
    if (acceptor_) throw std::logic_error("server already started");
    const tcp::endpoint ep(net::ip::make_address(address), port);
    acceptor_.emplace(ioc_);
    acceptor_->open(ep.protocol());
    acceptor_->set_option(net::socket_base::reuse_address(true));
    acceptor_->bind(ep);
    acceptor_->listen();
    const auto bound = acceptor_->local_endpoint().port();
    do_accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
    return bound;
  }

  /// Stops accepting, disconnects clients and waits for every session to
  /// flush its files.
  void stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_) {
      net::post(ioc_, [this] {
        beast::error_code ec;
        acceptor_->close(ec);
      });
    }
    if (io_thread_.joinable()) io_thread_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard lk(mu_);
      for (auto& w : sockets_) {
        if (auto s = w.lock()) {
          beast::error_code ec;
          s->shutdown(tcp::socket::shutdown_both, ec);
        }
      }
      workers.swap(workers_);
    }
    for (auto& t : workers) {
      if (t.joinable()) t.join();
    }
  }

  ServerState& state() { return *state_; }

 private:
  void do_accept() {
    acceptor_->async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (ec || stopping_) return;
      auto s = std::make_shared<tcp::socket>(std::move(sock));
      {
        std::lock_guard lk(mu_);
        sockets_.push_back(s);
        workers_.emplace_back([this, s] { serve(s); });
      }
      do_accept();
    });
  }

  void serve(const std::shared_ptr<tcp::socket>& sock) {
    beast::error_code ec;
    beast::flat_buffer buf;
    http::request<http::string_body> req;
    http::read(*sock, buf, req, ec);
    if (ec) return;
    if (websocket::is_upgrade(req)) {
      serve_ws(*sock, req);
    } else {
      serve_http(*sock, req);
    }
    sock->shutdown(tcp::socket::shutdown_both, ec);
  }

  void serve_http(tcp::socket& sock, const http::request<http::string_body>& req) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    if (req.method() == http::verb::get && req.target() == "/status") {
      res.result(http::status::ok);
      res.set(http::field::content_type, "application/json");
      res.body() = state_->status().dump();
    } else {
      res.result(http::status::not_found);
      res.set(http::field::content_type, "text/plain");
      res.body() = "not found\n";
    }
    res.prepare_payload();
    beast::error_code ec;
    http::write(sock, res, ec);
  }

  void serve_ws(tcp::socket& sock, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket&> ws(sock);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    auto session = state_->open_session();
    for (;;) {
      beast::flat_buffer b;
      ws.read(b, ec);
      if (ec) break;
      Session::Reply reply;
      if (!ws.got_text()) {
        reply.messages.push_back(error_message(0, now_ms(), ErrorCode::kBadSchema, "binary frames are not accepted").dump());
        reply.close = true;
      } else {
        reply = session->handle(beast::buffers_to_string(b.data()));
      }
      ws.text(true);
      for (const auto& m : reply.messages) {
        ws.write(net::buffer(m), ec);
        if (ec) break;
      }
      if (ec) break;
      if (reply.close) {
        ws.close(websocket::close_code::policy_error, ec);
        break;
      }
    }
    session->finish();
  }

  std::shared_ptr<ServerState> state_;
  net::io_context ioc_;
  std::optional<tcp::acceptor> acceptor_;
  std::thread io_thread_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<std::weak_ptr<tcp::socket>> sockets_;
};

}  // namespace exflow::server
