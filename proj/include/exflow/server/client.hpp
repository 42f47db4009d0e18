#pragma once

// Minimal blocking client for the wire protocol and the status endpoint.

#include <exflow/server/protocol.hpp>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <optional>
#include <string>

namespace exflow::server {

class WsClient {
 public:
  WsClient(const std::string& host, unsigned short port) : resolver_(ioc_), ws_(ioc_) {
    const auto results = resolver_.resolve(host, std::to_string(port));
    boost::asio::connect(ws_.next_layer(), results.begin(), results.end());
    ws_.handshake(host + ":" + std::to_string(port), "/");
    ws_.text(true);
  }

  void send(const json& j) { send_text(j.dump()); }
  void send_text(const std::string& s) { ws_.write(boost::asio::buffer(s)); }

  /// Blocks for the next message; nothing once the server has closed.
  std::optional<json> receive() {
    boost::beast::flat_buffer b;
    boost::beast::error_code ec;
    ws_.read(b, ec);
    if (ec) return std::nullopt;
    return json::parse(boost::beast::buffers_to_string(b.data()));
  }

  void close() {
    boost::beast::error_code ec;
    ws_.close(boost::beast::websocket::close_code::normal, ec);
    // drain until the server's close frame arrives
    boost::beast::flat_buffer b;
    while (!ec) ws_.read(b, ec);
  }

 private:
  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::resolver resolver_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
};

/// Body of `GET <target>`; throws on transport errors.
inline std::string http_get(const std::string& host, unsigned short port, const std::string& target,
                            int* status = nullptr) {
  namespace http = boost::beast::http;
  boost::asio::io_context ioc;
  boost::asio::ip::tcp::resolver resolver(ioc);
  boost::asio::ip::tcp::socket sock(ioc);
  const auto results = resolver.resolve(host, std::to_string(port));
  boost::asio::connect(sock, results.begin(), results.end());
  http::request<http::empty_body> req(http::verb::get, target, 11);
  req.set(http::field::host, host);
  http::write(sock, req);
  boost::beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  if (status) *status = static_cast<int>(res.result_int());
  boost::beast::error_code ec;
  sock.shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
  return res.body();
}

}  // namespace exflow::server
