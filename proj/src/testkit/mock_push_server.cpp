#include "evgw/testkit/mock_push_server.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>

namespace evgw::testkit {

struct MockPushServer::Impl {
    httplib::Server server;
    std::thread thread;
    std::uint16_t port = 0;
    std::atomic<int> status{200};
    std::atomic<std::int64_t> delay_ms{0};
    mutable std::mutex mutex;
    mutable std::condition_variable arrived;
    std::vector<PushRecord> records;
};

MockPushServer::MockPushServer() : impl_(std::make_unique<Impl>()) {
    impl_->server.Post(".*", [impl = impl_.get()](const httplib::Request& req, httplib::Response& res) {
        const auto received_at = SteadyClock::now();
        if (const auto delay = impl->delay_ms.load(); delay > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        const int status = impl->status.load();
        if (status >= 200 && status < 300) {
            Json body = Json::parse(req.body, nullptr, false);
            {
                std::lock_guard lock(impl->mutex);
                impl->records.push_back(PushRecord{std::move(body), req.get_header_value("Authorization"), received_at});
            }
            impl->arrived.notify_all();
        }
        res.status = status;
        res.set_content(R"({"success":1})", "application/json");
    });
}

MockPushServer::~MockPushServer() { stop(); }

std::uint16_t MockPushServer::start() {
    if (impl_->thread.joinable()) return impl_->port;
    impl_->port = static_cast<std::uint16_t>(impl_->server.bind_to_any_port("127.0.0.1"));
    impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void MockPushServer::stop() {
    if (!impl_->thread.joinable()) return;
    impl_->server.stop();
    impl_->thread.join();
}

std::string MockPushServer::url() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port) + "/fcm/send";
}

std::uint16_t MockPushServer::port() const { return impl_->port; }

void MockPushServer::set_status(int status) { impl_->status = status; }

void MockPushServer::set_delay(std::chrono::milliseconds delay) { impl_->delay_ms = delay.count(); }

std::vector<PushRecord> MockPushServer::received() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->records;
}

std::size_t MockPushServer::count() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->records.size();
}

bool MockPushServer::wait_for(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->mutex);
    return impl_->arrived.wait_for(lock, timeout, [&] { return impl_->records.size() >= count; });
}

void MockPushServer::clear() {
    std::lock_guard lock(impl_->mutex);
    impl_->records.clear();
}

}  // namespace evgw::testkit
