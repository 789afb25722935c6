#pragma once

// HTTP and WebSocket front end. Handlers never touch loop state: they post
// commands to the driver and get answers through completion callbacks.

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "presstrain/gateway/driver.hpp"
#include "presstrain/gateway/hub.hpp"
#include "presstrain/gateway/messages.hpp"
#include "presstrain/gateway/server_config.hpp"
#include "presstrain/gateway/sources.hpp"
#include "presstrain/gateway/store.hpp"

namespace presstrain::gateway {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

inline http::status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return http::status::not_found;
    case ErrorCode::Busy: return http::status::conflict;
    case ErrorCode::InvalidInput:
    case ErrorCode::InvalidData: return http::status::bad_request;
    default: return http::status::internal_server_error;
  }
}

inline std::string error_body(const Error& e) {
  return nlohmann::json{{"v", kSchemaVersion}, {"error", to_string(e.code())}, {"message", e.message()}}.dump();
}

struct ServerContext {
  ServerConfig config;
  Hub& hub;
  Driver& driver;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, ServerContext& ctx) : ws_(std::move(socket)), ctx_(ctx) {}

  ~WsSession() {
    if (sub_) ctx_.hub.unsubscribe(*sub_);
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    if (ctx_.config.stream_send_buffer_bytes > 0) {
      beast::error_code ec;
      beast::get_lowest_layer(ws_).socket().set_option(
          net::socket_base::send_buffer_size(ctx_.config.stream_send_buffer_bytes), ec);
    }
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    box_ = ctx_.hub.make_outbox();
    std::weak_ptr<WsSession> weak = shared_from_this();
    sub_ = ctx_.hub.subscribe(box_, [weak] {
      if (auto self = weak.lock()) self->schedule_pump();
    });
    do_read();
  }

  void schedule_pump() {
    if (pump_scheduled_.exchange(true)) return;
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->pump_scheduled_.store(false);
      self->pump();
    });
  }

  void pump() {
    if (writing_ || closed_) return;
    auto m = box_->pop();
    if (!m) return;
    writing_ = true;
    current_ = m->text;
    ws_.text(true);
    ws_.async_write(net::buffer(*current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->pump();
    });
  }

  void do_read() {
    ws_.async_read(rbuf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      return;
    }
    const std::string text = beast::buffers_to_string(rbuf_.data());
    rbuf_.consume(rbuf_.size());
    try {
      const auto msg = parse_inbound(text);
      if (const auto* f = std::get_if<ForceInputMsg>(&msg)) {
        ctx_.driver.post(ForceInput{f->newtons});
      } else {
        std::weak_ptr<WsSession> weak = shared_from_this();
        ctx_.driver.post(Control{std::get<ControlMsg>(msg), [weak](std::string reply) {
                                   if (auto self = weak.lock()) self->send_private(std::move(reply));
                                 }});
      }
    } catch (const Error& e) {
      send_private(error_message(e.message()));
    }
    do_read();
  }

  // Replies to this client only; never dropped.
  void send_private(std::string text) {
    box_->push({Delivery::Control, std::make_shared<const std::string>(std::move(text))});
    schedule_pump();
  }

  websocket::stream<beast::tcp_stream> ws_;
  ServerContext& ctx_;
  std::shared_ptr<Outbox> box_;
  std::optional<Hub::Id> sub_;
  std::atomic<bool> pump_scheduled_{false};
  bool writing_ = false;
  bool closed_ = false;
  std::shared_ptr<const std::string> current_;
  beast::flat_buffer rbuf_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, ServerContext& ctx) : stream_(std::move(socket)), ctx_(ctx) {}

  void run() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  using Response = http::response<http::string_body>;

  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buf_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), ctx_)->run(std::move(req_));
        return;
      }
      return send(json_response(http::status::not_found, R"({"v":1,"error":"NotFound"})"));
    }
    route();
  }

  void route() {
    const std::string target(req_.target());
    const auto q = target.find('?');
    const std::string path = target.substr(0, q);
    const std::string query = q == std::string::npos ? std::string() : target.substr(q + 1);

    if (path == "/api/config" && req_.method() == http::verb::get)
      return send(json_response(http::status::ok, to_json(ctx_.config).dump()));

    if (path == "/api/session" && req_.method() == http::verb::post) return start_session();

    static constexpr std::string_view prefix = "/api/session/";
    static constexpr std::string_view suffix = "/export";
    if (req_.method() == http::verb::get && path.starts_with(prefix) && path.ends_with(suffix) &&
        path.size() > prefix.size() + suffix.size()) {
      const auto id = path.substr(prefix.size(), path.size() - prefix.size() - suffix.size());
      return export_session(id, query.find("format=csv") != std::string::npos);
    }
    send(json_response(http::status::not_found, R"({"v":1,"error":"NotFound","message":"no such endpoint"})"));
  }

  void start_session() {
    StartSession cmd;
    try {
      const auto j = nlohmann::json::parse(req_.body());
      cmd.group = group_from_string(j.at("group").get<std::string>());
      cmd.participant_id = j.at("participant_id").get<std::string>();
      cmd.mode = session_mode_from_string(j.value("mode", std::string("protocol")));
    } catch (const nlohmann::json::exception& e) {
      return send_error(Error(ErrorCode::InvalidInput, std::string("bad session request: ") + e.what()));
    } catch (const Error& e) {
      return send_error(e);
    }
    cmd.done = [self = shared_from_this()](StartReply r) {
      net::post(self->stream_.get_executor(), [self, r = std::move(r)] {
        if (const auto* id = std::get_if<std::string>(&r))
          self->send(self->json_response(http::status::created,
                                         nlohmann::json{{"v", kSchemaVersion}, {"id", *id}}.dump()));
        else
          self->send_error(std::get<Error>(r));
      });
    };
    ctx_.driver.post(std::move(cmd));
  }

  void export_session(std::string id, bool csv) {
    ctx_.driver.post(ExportSession{std::move(id), [self = shared_from_this(), csv](ExportReply r) {
                                     net::post(self->stream_.get_executor(), [self, csv, r = std::move(r)] {
                                       if (r.error) return self->send_error(*r.error);
                                       Response res{http::status::ok, self->req_.version()};
                                       res.set(http::field::content_type, csv ? "text/csv" : "application/json");
                                       res.body() = csv ? r.files->csv_text : r.files->json_text;
                                       self->send(std::move(res));
                                     });
                                   }});
  }

  Response json_response(http::status status, std::string body) const {
    Response res{status, req_.version()};
    res.set(http::field::content_type, "application/json");
    res.body() = std::move(body);
    return res;
  }

  void send_error(const Error& e) { send(json_response(status_for(e.code()), error_body(e))); }

  void send(Response res) {
    res.keep_alive(req_.keep_alive());
    res.prepare_payload();
    res_ = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!self->res_->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  ServerContext& ctx_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  std::shared_ptr<Response> res_;
};

/// Owns every gateway part. `start` opens the source, binds the listener
/// and launches the loop, I/O and persistence threads.
class Server {
 public:
  explicit Server(ServerConfig cfg, std::shared_ptr<GloveSource> source = nullptr)
      : cfg_(std::move(cfg)), source_(source ? std::move(source) : std::shared_ptr<GloveSource>(make_source(cfg_))) {
    cfg_.validate();
    cfg_.prepare_data_dir();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start(int io_threads = 2) {
    source_->open();
    store_ = std::make_unique<SessionStore>(cfg_.data_dir);
    hub_ = std::make_unique<Hub>(cfg_.subscriber_queue);
    driver_ = std::make_unique<Driver>(cfg_, source_, *hub_, *store_);
    try {
      const auto endpoint = tcp::endpoint(net::ip::make_address(cfg_.address), static_cast<unsigned short>(cfg_.port));
      acceptor_.open(endpoint.protocol());
      acceptor_.set_option(net::socket_base::reuse_address(true));
      acceptor_.bind(endpoint);
      acceptor_.listen(net::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
      throw Error(ErrorCode::InvalidInput,
                  "cannot listen on " + cfg_.address + ":" + std::to_string(cfg_.port) + ": " + e.what());
    }
    port_ = acceptor_.local_endpoint().port();
    cfg_.port = port_;
    ctx_ = std::make_unique<ServerContext>(ServerContext{cfg_, *hub_, *driver_});
    do_accept();
    loop_ = std::jthread([this](std::stop_token st) { driver_->run(st); });
    for (int i = 0; i < io_threads; ++i) io_.emplace_back([this] { ioc_.run(); });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    if (loop_.joinable()) {
      loop_.request_stop();
      loop_.join();
    }
    ioc_.stop();
    for (auto& t : io_)
      if (t.joinable()) t.join();
    source_->close();
    if (store_) store_->flush();
  }

  int port() const { return port_; }
  const ServerConfig& config() const { return cfg_; }
  DriverStats stats() const { return driver_->stats(); }
  Hub& hub() { return *hub_; }
  SessionStore& store() { return *store_; }
  Driver& driver() { return *driver_; }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<HttpSession>(std::move(socket), *ctx_)->run();
      if (acceptor_.is_open()) do_accept();
    });
  }

  ServerConfig cfg_;
  std::shared_ptr<GloveSource> source_;
  std::unique_ptr<SessionStore> store_;
  std::unique_ptr<Hub> hub_;
  std::unique_ptr<Driver> driver_;
  std::unique_ptr<ServerContext> ctx_;
  net::io_context ioc_;
  tcp::acceptor acceptor_{ioc_};
  std::jthread loop_;
  std::vector<std::thread> io_;
  int port_ = 0;
  std::atomic<bool> stopped_{false};
};

}  // namespace presstrain::gateway
