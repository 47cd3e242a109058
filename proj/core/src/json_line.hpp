// Copyright 2026 The xrac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "xrac/errors.hpp"
#include "xrac/net.hpp"

namespace xrac::detail {

using Json = nlohmann::json;

inline constexpr std::chrono::milliseconds kRpcTimeout{10000};

inline Json ok_reply() { return Json{{"ok", true}}; }

inline Json error_reply(const std::string& message) { return Json{{"ok", false}, {"error", message}}; }

/// Sends one request line and reads one reply line. Throws Error on a dead
/// peer, a timeout, unparsable JSON or an {"ok":false} reply.
inline Json rpc(net::LineStream& stream, const Json& request, std::chrono::milliseconds timeout = kRpcTimeout) {
    stream.write_line(request.dump());
    auto line = stream.read_line(timeout);
    if (!line) throw Error("no reply from peer");
    Json reply = Json::parse(*line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw Error("unparsable reply");
    if (!reply.value("ok", false)) throw Error(reply.value("error", std::string("request refused")));
    return reply;
}

}  // namespace xrac::detail
