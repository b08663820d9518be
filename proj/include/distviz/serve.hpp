#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace distviz::serve {

/// Static file server rooted at `dir` (bundles, manifest) with permissive CORS
/// for a locally served explorer.
std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& dir);

/// Blocks until the server stops. Returns false if binding failed.
bool serve_directory(const std::filesystem::path& dir, const std::string& host, int port);

} // namespace distviz::serve
