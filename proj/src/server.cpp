#include "hhil/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace hhil::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxOutbox = 20000;

std::string_view mime_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

}  // namespace

struct SessionServer::Impl {
  struct Client;

  struct Inbound {
    std::optional<telemetry::Frame> frame;
    std::string error;
    bool from_operator = false;
  };

  Impl(const runner::EpisodeSetup& setup, ServerOptions opt) : options(std::move(opt)), session(setup) {}

  ServerOptions options;
  net::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread io_thread;
  std::thread tick_thread;
  std::atomic<bool> stopping{false};
  std::atomic<bool> finished{false};

  mutable std::mutex session_mutex;
  telemetry::Session session;

  std::mutex inbox_mutex;
  std::deque<Inbound> inbox;

  std::mutex done_mutex;
  std::condition_variable done_cv;

  // I/O thread only.
  std::vector<std::weak_ptr<Client>> clients;
  std::weak_ptr<Client> operator_client;

  std::ofstream log_file;
  std::size_t written = 0;

  void accept();
  void handle_http(std::shared_ptr<beast::tcp_stream> stream);
  void attach(std::shared_ptr<Client> c);
  void broadcast(std::vector<std::string> messages);
  void push(Inbound in) {
    std::lock_guard lock(inbox_mutex);
    inbox.push_back(std::move(in));
  }
  void flush_log();
  void run_ticks();
  void finish();
};

struct SessionServer::Impl::Client : std::enable_shared_from_this<Client> {
  Client(Impl& server, tcp::socket socket) : server(server), ws(std::move(socket)) {}

  Impl& server;
  websocket::stream<beast::tcp_stream> ws;
  beast::flat_buffer buffer;
  std::deque<std::string> outbox;
  bool writing = false;
  bool closed = false;
  bool is_operator = false;

  void send(std::string message) {
    if (closed) return;
    if (outbox.size() >= kMaxOutbox) {
      close();
      return;
    }
    outbox.push_back(std::move(message));
    if (!writing) write_next();
  }

  void write_next() {
    if (outbox.empty() || closed) {
      writing = false;
      return;
    }
    writing = true;
    ws.text(true);
    ws.async_write(net::buffer(outbox.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->outbox.pop_front();
      self->write_next();
    });
  }

  void read_next() {
    ws.async_read(buffer, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const auto text = beast::buffers_to_string(self->buffer.data());
      self->buffer.consume(self->buffer.size());
      Inbound in;
      in.from_operator = self->is_operator;
      try {
        in.frame = telemetry::decode(text);
      } catch (const ParseError& e) {
        in.error = e.what();
      }
      self->server.push(std::move(in));
      self->read_next();
    });
  }

  void close() {
    if (closed) return;
    closed = true;
    outbox.clear();
    beast::error_code ignored;
    beast::get_lowest_layer(ws).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws).socket().close(ignored);
  }
};

void SessionServer::Impl::accept() {
  acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    handle_http(std::make_shared<beast::tcp_stream>(std::move(socket)));
    accept();
  });
}

void SessionServer::Impl::handle_http(std::shared_ptr<beast::tcp_stream> stream) {
  auto buffer = std::make_shared<beast::flat_buffer>();
  auto req = std::make_shared<http::request<http::string_body>>();
  http::async_read(*stream, *buffer, *req, [this, stream, buffer, req](beast::error_code ec, std::size_t) {
    if (ec) return;
    if (websocket::is_upgrade(*req)) {
      if (req->target() != "/session") {
        http::response<http::string_body> res{http::status::not_found, req->version()};
        res.body() = "no such endpoint\n";
        res.prepare_payload();
        http::write(*stream, res, ec);
        return;
      }
      auto client = std::make_shared<Client>(*this, stream->release_socket());
      client->ws.async_accept(*req, [this, client](beast::error_code aec) {
        if (aec) return;
        attach(client);
      });
      return;
    }

    auto respond = [&](http::status status, const std::string& body) {
      http::response<http::string_body> res{status, req->version()};
      res.set(http::field::content_type, "text/plain");
      res.keep_alive(false);
      res.body() = body;
      res.prepare_payload();
      http::write(*stream, res, ec);
    };
    if (req->method() != http::verb::get) return respond(http::status::bad_request, "GET only\n");
    if (options.static_dir.empty()) return respond(http::status::not_found, "static serving disabled\n");
    std::string target(req->target());
    target = target.substr(0, target.find('?'));
    if (target.find("..") != std::string::npos) return respond(http::status::bad_request, "bad path\n");
    if (target.empty() || target.back() == '/') target += "index.html";
    const fs::path path = fs::path(options.static_dir) / target.substr(1);

    http::file_body::value_type body;
    body.open(path.string().c_str(), beast::file_mode::scan, ec);
    if (ec) return respond(http::status::not_found, "not found\n");
    const auto size = body.size();
    http::response<http::file_body> res{std::piecewise_construct, std::make_tuple(std::move(body)),
                                        std::make_tuple(http::status::ok, req->version())};
    res.set(http::field::content_type, beast::string_view(mime_type(path).data(), mime_type(path).size()));
    res.content_length(size);
    res.keep_alive(false);
    http::write(*stream, res, ec);
  });
}

void SessionServer::Impl::attach(std::shared_ptr<Client> c) {
  const auto current = operator_client.lock();
  if (!current || current->closed) {
    c->is_operator = true;
    operator_client = c;
  }
  std::erase_if(clients, [](const std::weak_ptr<Client>& w) {
    const auto p = w.lock();
    return !p || p->closed;
  });
  clients.push_back(c);
  std::vector<telemetry::Frame> hello;
  {
    std::lock_guard lock(session_mutex);
    hello.push_back({telemetry::FrameKind::Event, "session/hello", session.t(),
                     {{"role", c->is_operator ? "operator" : "observer"}}});
    for (auto& f : session.snapshot()) hello.push_back(std::move(f));
  }
  for (const auto& f : hello) c->send(telemetry::encode(f));
  c->read_next();
}

void SessionServer::Impl::broadcast(std::vector<std::string> messages) {
  net::post(ioc, [this, messages = std::move(messages)] {
    for (const auto& w : clients) {
      const auto c = w.lock();
      if (!c || c->closed) continue;
      for (const auto& m : messages) c->send(m);
    }
  });
}

void SessionServer::Impl::flush_log() {
  const auto& log = session.log();
  if (log_file.is_open()) {
    for (; written < log.size(); ++written) log_file << telemetry::serialize(log[written]) << '\n';
    log_file.flush();
  } else {
    written = log.size();
  }
}

void SessionServer::Impl::run_ticks() {
  using clock = std::chrono::steady_clock;
  const bool throttled = options.timescale > 0;
  const auto period = throttled ? std::chrono::duration_cast<clock::duration>(
                                      std::chrono::duration<double>(1.0 / options.timescale))
                                : clock::duration::zero();
  auto next = clock::now();
  {
    std::lock_guard lock(session_mutex);
    flush_log();
  }
  while (!stopping) {
    if (throttled) {
      next += period;
      std::this_thread::sleep_until(next);
    }
    std::deque<Inbound> pending;
    {
      std::lock_guard lock(inbox_mutex);
      pending.swap(inbox);
    }
    std::vector<std::string> messages;
    bool done = false;
    {
      std::lock_guard lock(session_mutex);
      for (auto& in : pending) {
        if (in.frame) {
          session.submit(*in.frame, in.from_operator);
        } else {
          session.submit_malformed(in.error);
        }
      }
      const auto frames = session.tick();
      flush_log();
      messages.reserve(frames.size());
      for (const auto& f : frames) messages.push_back(telemetry::encode(f));
      done = (options.stop_when_settled && session.complete()) ||
             (options.max_seconds && session.t() >= *options.max_seconds);
    }
    broadcast(std::move(messages));
    if (done) break;
  }
  finish();
}

void SessionServer::Impl::finish() {
  {
    std::lock_guard lock(done_mutex);
    finished = true;
  }
  done_cv.notify_all();
}

SessionServer::SessionServer(const runner::EpisodeSetup& setup, ServerOptions options)
    : impl_(std::make_unique<Impl>(setup, std::move(options))) {}

SessionServer::~SessionServer() { stop(); }

std::uint16_t SessionServer::start() {
  auto& m = *impl_;
  if (!m.options.log_path.empty()) {
    m.log_file.open(m.options.log_path, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!m.log_file) throw Error("cannot open session log '" + m.options.log_path + "'");
  }
  const tcp::endpoint endpoint(net::ip::make_address(m.options.address), m.options.port);
  m.acceptor.emplace(m.ioc);
  m.acceptor->open(endpoint.protocol());
  m.acceptor->set_option(net::socket_base::reuse_address(true));
  m.acceptor->bind(endpoint);
  m.acceptor->listen();
  const auto port = m.acceptor->local_endpoint().port();
  m.accept();
  m.io_thread = std::thread([&m] {
    auto guard = net::make_work_guard(m.ioc);
    m.ioc.run();
  });
  m.tick_thread = std::thread([&m] { m.run_ticks(); });
  return port;
}

void SessionServer::wait() {
  auto& m = *impl_;
  std::unique_lock lock(m.done_mutex);
  m.done_cv.wait(lock, [&m] { return m.finished.load() || !m.tick_thread.joinable(); });
}

void SessionServer::stop() {
  auto& m = *impl_;
  m.stopping = true;
  if (m.tick_thread.joinable()) m.tick_thread.join();
  if (m.io_thread.joinable()) {
    net::post(m.ioc, [&m] {
      beast::error_code ignored;
      if (m.acceptor) m.acceptor->close(ignored);
      for (const auto& w : m.clients) {
        if (const auto c = w.lock()) c->close();
      }
    });
    m.ioc.stop();
    m.io_thread.join();
  }
  if (m.log_file.is_open()) m.log_file.close();
}

void SessionServer::request_stop() noexcept { impl_->stopping = true; }

std::vector<telemetry::SessionEvent> SessionServer::log() const {
  std::lock_guard lock(impl_->session_mutex);
  return impl_->session.log();
}

double SessionServer::sim_time() const {
  std::lock_guard lock(impl_->session_mutex);
  return impl_->session.t();
}

}  // namespace hhil::server
