#pragma once

#include <string>

#include "prospector/service.hpp"

namespace prospector::service {

struct HttpResponse {
  int status = 200;
  Json body;
};

/// Routes one request without any socket. Bodies are JSON; errors come back as
/// {"error": {"code", "message", "fields"?}} with status 400, 404, 409 or 500.
HttpResponse handle_request(SessionStore& store, const std::string& method, const std::string& path,
                            const std::string& body);

/// Serves the API until the process is stopped. Returns false if the port cannot be bound.
bool serve(SessionStore& store, const std::string& host, int port);

}  // namespace prospector::service
