#pragma once

// Message transports: an in-process loopback queue and newline-delimited TCP.

#include "tempspy/error.hpp"
#include "tempspy/wire.hpp"

#include <boost/asio/ip/tcp.hpp>

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace tempspy {

class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual void send(const SpyMessage& msg) = 0;
  virtual void close() {}
};

/// Queue of encoded lines; the receiving side reads them back as text.
class LoopbackChannel : public MessageSink {
 public:
  void send(const SpyMessage& msg) override { lines_.push_back(encode_message(msg)); }

  std::optional<std::string> receive() {
    if (lines_.empty()) return std::nullopt;
    std::string line = std::move(lines_.front());
    lines_.pop_front();
    return line;
  }

  std::size_t pending() const noexcept { return lines_.size(); }

 private:
  std::deque<std::string> lines_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

struct RetryPolicy {
  int attempts = 6;
  std::chrono::milliseconds initial_backoff{50};
  double factor = 2.0;
};

/// Client side. Connects lazily, reconnecting with exponential backoff when a
/// connect or write fails.
class TcpSink : public MessageSink {
 public:
  TcpSink(std::string host, std::uint16_t port, RetryPolicy retry = {})
      : host_(std::move(host)), port_(port), retry_(retry) {}

  ~TcpSink() override {
    try {
      close();
    } catch (...) {
    }
  }

  void send(const SpyMessage& msg) override {
    const std::string line = encode_message(msg);
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      if (stream_ && *stream_) {
        *stream_ << line << std::flush;
        if (*stream_) return;
      }
      stream_.reset();
      if (attempt > 1) {
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.factor));
      }
      if (attempt > retry_.attempts)
        throw TransportError("cannot deliver message to " + host_ + ":" + std::to_string(port_) + " after " +
                             std::to_string(retry_.attempts) + " attempts");
      connect();
    }
  }

  void close() override {
    if (!stream_) return;
    stream_->flush();
    stream_->close();
    stream_.reset();
  }

 private:
  void connect() {
    auto s = std::make_unique<boost::asio::ip::tcp::iostream>(host_, std::to_string(port_));
    if (*s) stream_ = std::move(s);
  }

  std::string host_;
  std::uint16_t port_;
  RetryPolicy retry_;
  std::unique_ptr<boost::asio::ip::tcp::iostream> stream_;
};

/// Server side: accepts connections one at a time and hands every received
/// line (without its newline) to a callback.
class TcpLineListener {
 public:
  explicit TcpLineListener(std::uint16_t port, const std::string& address = "127.0.0.1")
      : acceptor_(io_, boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address(address), port)) {}

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  /// Serves `connections` clients in turn, each until it disconnects.
  void serve(std::size_t connections, const std::function<void(const std::string&)>& on_line) {
    for (std::size_t i = 0; i < connections; ++i) {
      boost::asio::ip::tcp::iostream stream;
      acceptor_.accept(stream.socket());
      for (std::string line; std::getline(stream, line);) on_line(line);
    }
  }

 private:
  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
};

}  // namespace tempspy
