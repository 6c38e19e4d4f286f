#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "dafny_pilot/config.hpp"

namespace dafny_pilot {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    EngineSettings settings;
    /// Served as static files under /ui/ when set.
    std::filesystem::path ui_dir;
};

struct ServiceReply {
    int status = 200;
    nlohmann::json body;
};

struct Session;

/// Local HTTP+JSON front end over sessions. No authentication: it binds to
/// loopback by default and must not be exposed beyond the local machine.
class Service {
public:
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const { return port_; }

    /// Routes one request. Exposed so the routing can be exercised without
    /// sockets; the HTTP server calls exactly this.
    ServiceReply handle(const std::string& method, const std::string& path, const std::string& body,
                        const std::map<std::string, std::string>& query);

private:
    ServiceReply create_session(const std::string& body);
    ServiceReply suggest(Session& s);
    ServiceReply decide(Session& s, const std::string& index, bool accept);
    ServiceReply verify(Session& s);
    ServiceReply events(Session& s, const std::map<std::string, std::string>& query);
    ServiceReply health();
    std::shared_ptr<Session> find(const std::string& id);
    void setup_routes();

    ServiceConfig cfg_;
    struct Server;
    std::unique_ptr<Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace dafny_pilot
