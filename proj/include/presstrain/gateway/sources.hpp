#pragma once

// Glove byte sources polled by the driver loop once per tick.

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>

#include "presstrain/error.hpp"
#include "presstrain/fsr_model.hpp"
#include "presstrain/gateway/server_config.hpp"
#include "presstrain/glovewire.hpp"
#include "presstrain/sim_glove.hpp"

namespace presstrain::gateway {

class GloveSource {
 public:
  virtual ~GloveSource() = default;

  /// Throws SourceFailure when the device cannot be opened.
  virtual void open() {}
  virtual void close() {}
  /// Bytes received since the previous call. Never blocks.
  virtual std::vector<std::uint8_t> read(double now_s) = 0;
  virtual bool healthy() const = 0;
  virtual std::string describe() const = 0;
  /// Force pressed onto a simulated glove; real hardware ignores it.
  virtual void set_pressed_force(double /*force_N*/) {}
  /// A copy of the sensor behind `channel` when the source models one.
  virtual std::optional<FsrSensor> model_sensor(std::size_t /*channel*/) const { return std::nullopt; }
};

/// A SimulatedGlove pressed on one channel with the most recent requested
/// force. Emits one frame per read.
class SimulatedSource final : public GloveSource {
 public:
  SimulatedSource(std::uint64_t seed, std::size_t channel = kIndexFingertipChannel)
      : glove_(seed), channel_(channel) {
    if (channel_ >= kChannelCount) throw Error(ErrorCode::InvalidInput, "channel out of range");
  }

  std::vector<std::uint8_t> read(double now_s) override {
    if (failed_.load()) return {};
    const double dt = last_ ? std::max(now_s - *last_, 1e-4) : 1.0 / 60.0;
    last_ = now_s;
    std::array<double, kChannelCount> forces{};
    forces[channel_] = force_.load();
    const auto bytes = encode_frame(glove_.sample(forces, dt));
    return {bytes.begin(), bytes.end()};
  }

  bool healthy() const override { return !failed_.load(); }
  std::string describe() const override { return "simulated glove"; }
  void set_pressed_force(double force_N) override { force_.store(std::max(0.0, force_N)); }
  std::optional<FsrSensor> model_sensor(std::size_t ch) const override { return glove_.sensor(ch); }

  /// Simulates losing the glove. Safe from any thread.
  void fail() { failed_.store(true); }

 private:
  SimulatedGlove glove_;
  std::size_t channel_;
  std::atomic<double> force_{0.0};
  std::atomic<bool> failed_{false};
  std::optional<double> last_;
};

/// Serial port or TCP stream read on a background thread.
class StreamSource final : public GloveSource {
 public:
  explicit StreamSource(SourceConfig cfg) : cfg_(std::move(cfg)) {}
  ~StreamSource() override { close(); }

  void open() override {
    namespace net = boost::asio;
    try {
      if (cfg_.kind == SourceKind::Serial) {
        auto port = std::make_unique<net::serial_port>(io_, cfg_.device);
        port->set_option(net::serial_port::baud_rate(static_cast<unsigned>(cfg_.baud)));
        serial_ = std::move(port);
      } else {
        auto sock = std::make_unique<net::ip::tcp::socket>(io_);
        net::ip::tcp::resolver resolver(io_);
        net::connect(*sock, resolver.resolve(cfg_.tcp_host, std::to_string(cfg_.tcp_port)));
        tcp_ = std::move(sock);
      }
    } catch (const boost::system::system_error& e) {
      throw Error(ErrorCode::SourceFailure, "cannot open " + describe() + ": " + e.what());
    }
    healthy_.store(true);
    reader_ = std::thread([this] { read_loop(); });
  }

  void close() override {
    boost::system::error_code ec;
    if (serial_) serial_->close(ec);
    if (tcp_) {
      tcp_->shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
      tcp_->close(ec);
    }
    if (reader_.joinable()) reader_.join();
    healthy_.store(false);
  }

  std::vector<std::uint8_t> read(double) override {
    std::lock_guard lock(mu_);
    std::vector<std::uint8_t> out;
    out.swap(pending_);
    return out;
  }

  bool healthy() const override { return healthy_.load(); }

  std::string describe() const override {
    return cfg_.kind == SourceKind::Serial ? "serial " + cfg_.device
                                           : "tcp " + cfg_.tcp_host + ":" + std::to_string(cfg_.tcp_port);
  }

 private:
  void read_loop() {
    std::array<std::uint8_t, 4096> buf{};
    while (true) {
      boost::system::error_code ec;
      const std::size_t n = serial_ ? serial_->read_some(boost::asio::buffer(buf), ec)
                                    : tcp_->read_some(boost::asio::buffer(buf), ec);
      if (ec) break;
      std::lock_guard lock(mu_);
      pending_.insert(pending_.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
    }
    healthy_.store(false);
  }

  SourceConfig cfg_;
  boost::asio::io_context io_;
  std::unique_ptr<boost::asio::serial_port> serial_;
  std::unique_ptr<boost::asio::ip::tcp::socket> tcp_;
  std::thread reader_;
  std::mutex mu_;
  std::vector<std::uint8_t> pending_;
  std::atomic<bool> healthy_{false};
};

inline std::unique_ptr<GloveSource> make_source(const ServerConfig& cfg) {
  if (cfg.source.kind == SourceKind::Simulated)
    return std::make_unique<SimulatedSource>(cfg.source.seed, static_cast<std::size_t>(cfg.force_channel));
  return std::make_unique<StreamSource>(cfg.source);
}

}  // namespace presstrain::gateway
