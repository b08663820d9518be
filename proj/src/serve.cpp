#include "distviz/serve.hpp"

#include "distviz/core.hpp"

#include <httplib.h>

namespace distviz::serve {

std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError("not a directory: " + dir.string());
    auto server = std::make_unique<httplib::Server>();
    if (!server->set_mount_point("/", dir.string()))
        throw DataError("cannot serve " + dir.string());
    server->set_file_extension_and_mimetype_mapping("json", "application/json");
    server->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
    });
    return server;
}

bool serve_directory(const std::filesystem::path& dir, const std::string& host, int port) {
    auto server = make_server(dir);
    return server->listen(host, port);
}

} // namespace distviz::serve
