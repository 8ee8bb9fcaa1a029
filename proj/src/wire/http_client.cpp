/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include "sensemesh/wire/http_client.hpp"

#include <httplib.h>

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <sstream>

namespace sensemesh::wire {

namespace {

std::int64_t epoch_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

core::Error map_http_error(httplib::Error e) {
    switch (e) {
    case httplib::Error::Connection:
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::BindIPAddress:
        return core::make_error(code::kPeerUnreachable, "cannot connect to peer");
    case httplib::Error::Read:
    case httplib::Error::Write:
        return core::make_error(code::kTimeout, "peer connection timed out or broke");
    default:
        return core::make_error(code::kPeerUnreachable,
                                "transport failure (" + std::to_string(static_cast<int>(e)) + ")");
    }
}

void apply_timeouts(httplib::Client& cli, int timeout_ms) {
    const time_t sec = timeout_ms / 1000;
    const time_t usec = (timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
}

} // namespace

core::Result<std::pair<std::string, int>> split_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= address.size()) {
        return core::make_error(code::kBadRequest, "address '" + address + "' is not host:port");
    }
    const std::string host = address.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(address.substr(colon + 1));
    } catch (const std::exception&) {
        return core::make_error(code::kBadRequest, "address '" + address + "' has a bad port");
    }
    if (port < 0 || port > 65535) {
        return core::make_error(code::kBadRequest, "address '" + address + "' has a bad port");
    }
    return std::make_pair(host, port);
}

core::Result<std::vector<WireFrame>> parse_frame_lines(const std::string& body) {
    std::vector<WireFrame> frames;
    size_t start = 0;
    while (start < body.size()) {
        auto end = body.find('\n', start);
        if (end == std::string::npos) end = body.size();
        if (end > start) {
            auto f = decode_frame(std::string_view(body).substr(start, end - start));
            if (!f) return f.error();
            frames.push_back(f.take());
        }
        start = end + 1;
    }
    return frames;
}

PeerClient::PeerClient(const std::string& address, int timeout_ms) : address_(address) {
    auto hp = split_address(address);
    // A bad address yields a client that cannot connect; every call then
    // reports PEER_UNREACHABLE, which is the honest observable outcome.
    const std::string host = hp ? hp.value().first : "127.0.0.1";
    const int port = hp ? hp.value().second : 1;
    cli_ = std::make_unique<httplib::Client>(host, port);
    cli_->set_keep_alive(true);
    apply_timeouts(*cli_, timeout_ms);
}

PeerClient::~PeerClient() = default;

core::Result<QueryBatch> PeerClient::run_query(const std::string& path) {
    QueryBatch batch;
    batch.t_sent_ms = epoch_ms_now();
    auto res = cli_->Get(path);
    batch.t_received_ms = epoch_ms_now();
    batch.rtt_ms = batch.t_received_ms - batch.t_sent_ms;
    if (!res) return map_http_error(res.error());
    auto frames = parse_frame_lines(res->body);
    if (!frames) return frames.error();
    if (frames.value().empty()) {
        return core::make_error(code::kBadFrame, "empty response body");
    }
    batch.header = frames.value().front();
    if (batch.header.type == FrameType::error) {
        return core::make_error(batch.header.body.value("code", std::string("BAD_FRAME")),
                                batch.header.body.value("message", std::string()));
    }
    for (size_t i = 1; i < frames.value().size(); ++i) {
        auto e = frame_to_element(frames.value()[i]);
        if (!e) return e.error();
        batch.elements.push_back(e.take());
    }
    return batch;
}

core::Result<QueryBatch> PeerClient::latest(const std::string& sensor, std::int64_t n,
                                            const std::string& id) {
    return run_query("/sensor/" + sensor + "/latest?n=" + std::to_string(n) + "&id=" + id);
}

core::Result<QueryBatch> PeerClient::range(const std::string& sensor, std::int64_t from,
                                           std::int64_t to, const std::string& id) {
    return run_query("/sensor/" + sensor + "/range?from=" + std::to_string(from) +
                     "&to=" + std::to_string(to) + "&id=" + id);
}

core::Result<WireFrame> PeerClient::post_frame(const std::string& path, const WireFrame& frame) {
    auto res = cli_->Post(path, encode_frame(frame) + "\n", "application/x-ndjson");
    if (!res) return map_http_error(res.error());
    auto frames = parse_frame_lines(res->body);
    if (!frames) return frames.error();
    if (frames.value().empty()) {
        return core::make_error(code::kBadFrame, "empty response body");
    }
    auto& f = frames.value().front();
    if (f.type == FrameType::error) {
        return core::make_error(f.body.value("code", std::string("BAD_FRAME")),
                                f.body.value("message", std::string()));
    }
    return f;
}

core::Result<WireFrame> PeerClient::get_frame(const std::string& path) {
    auto res = cli_->Get(path);
    if (!res) return map_http_error(res.error());
    auto frames = parse_frame_lines(res->body);
    if (!frames) return frames.error();
    if (frames.value().empty()) {
        return core::make_error(code::kBadFrame, "empty response body");
    }
    auto& f = frames.value().front();
    if (f.type == FrameType::error) {
        return core::make_error(f.body.value("code", std::string("BAD_FRAME")),
                                f.body.value("message", std::string()));
    }
    return f;
}

StreamReader::StreamReader(std::string address, std::string sensor, std::string sub_id,
                           Options opt)
    : address_(std::move(address)), sensor_(std::move(sensor)), sub_id_(std::move(sub_id)),
      opt_(opt) {}

core::Result<void> StreamReader::run(std::int64_t resume_from,
                                     const std::function<bool(const WireFrame&)>& on_frame) {
    auto hp = split_address(address_);
    if (!hp) return hp.error();
    httplib::Client cli(hp.value().first, hp.value().second);
    cli.set_connection_timeout(opt_.connect_timeout_ms / 1000,
                               (opt_.connect_timeout_ms % 1000) * 1000);
    cli.set_read_timeout(opt_.read_timeout_ms / 1000, (opt_.read_timeout_ms % 1000) * 1000);

    // resume_from < -1 means "no claim": the producer keeps (or initializes)
    // its own cursor, i.e. a fresh subscription starts with new elements only.
    std::string path = "/sensor/" + sensor_ + "/stream?sub=" + sub_id_;
    if (resume_from >= -1) path += "&resume_from=" + std::to_string(resume_from);

    std::string buffer;
    std::optional<core::Error> frame_error;
    bool detached = false;

    auto res = cli.Get(path, [&](const char* data, size_t len) {
        if (stop_.load()) {
            detached = true;
            return false;
        }
        buffer.append(data, len);
        size_t start = 0;
        while (true) {
            auto nl = buffer.find('\n', start);
            if (nl == std::string::npos) break;
            if (nl > start) {
                auto f = decode_frame(std::string_view(buffer).substr(start, nl - start));
                if (!f) {
                    frame_error = f.error();
                    return false;
                }
                if (!on_frame(f.value())) {
                    detached = true;
                    buffer.erase(0, nl + 1);
                    return false;
                }
            }
            start = nl + 1;
        }
        buffer.erase(0, start);
        return true;
    });

    if (frame_error) return *frame_error;
    if (detached || stop_.load()) return core::Result<void>::success();
    if (!res) {
        // Canceled covers the receiver returning false, which the branches
        // above already classified; anything else is a transport fault.
        if (res.error() == httplib::Error::Canceled) return core::Result<void>::success();
        return map_http_error(res.error());
    }
    // Server closed the stream (shutdown); report as peer loss so callers
    // apply their reconnect policy.
    return core::make_error(code::kPeerUnreachable, "stream closed by producer");
}

PushOutcome push_deliver(const std::string& address, const WireFrame& deliver_frame,
                         int timeout_ms) {
    auto hp = split_address(address);
    if (!hp) return PushOutcome{false, 0, 0, hp.error()};
    const auto& [host, port] = hp.value();

    struct addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    struct addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
        return PushOutcome{false, 0, 0,
                           core::make_error(code::kPeerUnreachable, "cannot resolve " + host)};
    }

    int fd = -1;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) {
        return PushOutcome{false, 0, 0,
                           core::make_error(code::kPeerUnreachable,
                                            "cannot connect to " + address)};
    }

    struct timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));

    const std::string body = encode_frame(deliver_frame) + "\n";
    std::ostringstream req;
    req << "POST /deliver HTTP/1.1\r\n"
        << "Host: " << address << "\r\n"
        << "Content-Type: application/x-ndjson\r\n"
        << "Content-Length: " << body.size() << "\r\n"
        << "Connection: close\r\n\r\n"
        << body;
    const std::string request = req.str();

    size_t sent = 0;
    while (sent < request.size()) {
        const auto n = ::send(fd, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            ::close(fd);
            return PushOutcome{true, sent, 0,
                               core::make_error(code::kTimeout, "send to " + address + " failed")};
        }
        sent += static_cast<size_t>(n);
    }

    std::string response;
    char chunk[4096];
    while (true) {
        const auto n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n < 0) {
            ::close(fd);
            return PushOutcome{true, sent, response.size(),
                               core::make_error(code::kTimeout,
                                                "no response from " + address)};
        }
        if (n == 0) break; // peer honored Connection: close
        response.append(chunk, static_cast<size_t>(n));
    }
    ::close(fd);

    const auto header_end = response.find("\r\n\r\n");
    if (header_end == std::string::npos) {
        return PushOutcome{true, sent, response.size(),
                           core::make_error(code::kBadFrame, "malformed HTTP response")};
    }
    auto frames = parse_frame_lines(response.substr(header_end + 4));
    if (!frames || frames.value().empty()) {
        return PushOutcome{true, sent, response.size(),
                           core::make_error(code::kBadFrame, "no frame in response body")};
    }
    return PushOutcome{true, sent, response.size(), frames.take().front()};
}

} // namespace sensemesh::wire
