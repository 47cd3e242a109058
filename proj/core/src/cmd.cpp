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

#include "xrac/cmd.hpp"

#include <spdlog/spdlog.h>

#include "json_line.hpp"
#include "xrac/errors.hpp"

namespace xrac::host {

using detail::Json;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

const char* to_string(ContainerRecord::State state) {
    switch (state) {
        case ContainerRecord::State::Created: return "created";
        case ContainerRecord::State::AwaitingAuthz: return "awaiting-authz";
        case ContainerRecord::State::Running: return "running";
        case ContainerRecord::State::Denied: return "denied";
        case ContainerRecord::State::Stopped: return "stopped";
    }
    return "created";
}

std::optional<ContainerRecord::State> container_state_from_string(std::string_view text) {
    using S = ContainerRecord::State;
    for (auto s : {S::Created, S::AwaitingAuthz, S::Running, S::Denied, S::Stopped})
        if (text == to_string(s)) return s;
    return std::nullopt;
}

ContainerManager::ContainerManager(Options options)
    : options_(std::move(options)), images_(options_.images), addresses_(options_.subnet, options_.host_address) {
    if (!options_.subnet.contains(options_.host_address))
        spdlog::warn("cmd: host address {} is outside {}", options_.host_address.to_string(),
                     options_.subnet.to_string());
    if (options_.enforcer_data) {
        try {
            host_port_ = std::make_shared<enforcer::DataClient>(*options_.enforcer_data);
            host_port_->attach(options_.host_address);
        } catch (const Error& e) {
            throw StartupError("cmd: cannot attach host to enforcer " + options_.enforcer_data->to_string() + ": " +
                               e.what());
        }
    }
}

ContainerManager::~ContainerManager() {
    std::map<std::string, Live> live;
    {
        std::lock_guard lock(mutex_);
        live.swap(live_);
    }
    for (auto& [id, l] : live)
        if (l.supplicant) l.supplicant->logoff();
}

std::string ContainerManager::create(const std::string& image_name) {
    if (!images_.contains(image_name)) throw Error("no such image: " + image_name);
    std::lock_guard lock(mutex_);
    ContainerRecord record;
    record.container_id = image_name + "-" + std::to_string(next_id_++);
    record.image_name = image_name;
    auto id = record.container_id;
    records_.emplace(id, std::move(record));
    return id;
}

bool ContainerManager::authorize_step1(const std::string& image_name) {
    spdlog::info("cmd: step 1 for image {}: permit", image_name);
    return true;
}

Step2Result ContainerManager::authorize_step2(const std::string& user_name, const std::string& password,
                                              ContainerRecord& record, LatencyBreakdown& latency) {
    Step2Result result;
    auto t = Clock::now();
    auto image = images_.load(record.image_name);
    latency.digest_ms = ms_since(t);
    if (!image) {
        result.deny_reason = "no-such-image";
        return result;
    }
    auto address = addresses_.allocate();
    if (!address) {
        result.deny_reason = "no-address";
        return result;
    }
    record.rac_address = address;

    eap::ContainerIdentity identity;
    identity.user_name = user_name;
    identity.image_name = record.image_name;
    identity.image_digest = image->digest;
    identity.rac_address = *address;

    t = Clock::now();
    CsOutcome outcome;
    auto supplicant = std::make_unique<CsClient>(options_.authenticator);
    try {
        (void)eap::encode_container_identity(identity);
        outcome = supplicant->authenticate(identity, to_bytes(password), options_.supplicant);
    } catch (const EncodeError& e) {
        // names that cannot be put in an identity never reach the wire
        spdlog::info("cmd: {}: {}", record.container_id, e.what());
        outcome.deny_reason = "aa-failed";
    }
    latency.aa_ms = ms_since(t);
    if (!outcome.authorized) {
        addresses_.release(*address);
        result.deny_reason = outcome.deny_reason;
        return result;
    }
    record.cazd = outcome.cazd;
    result.permitted = true;
    result.supplicant = std::move(supplicant);
    return result;
}

ContainerRecord ContainerManager::start(const std::string& container_id, const std::string& user_name,
                                        const std::string& password) {
    const auto t0 = Clock::now();
    ContainerRecord record;
    {
        std::lock_guard lock(mutex_);
        auto it = records_.find(container_id);
        if (it == records_.end()) throw Error("no such container: " + container_id);
        if (busy_.contains(container_id) || it->second.state != ContainerRecord::State::Created)
            throw Error("container " + container_id + " is " + to_string(it->second.state));
        busy_.insert(container_id);
        it->second.state = ContainerRecord::State::AwaitingAuthz;
        it->second.user_name = user_name;
        record = it->second;
    }

    LatencyBreakdown latency;
    Live live;
    authorize_step1(record.image_name);
    auto step2 = authorize_step2(user_name, password, record, latency);
    if (step2.permitted) {
        const auto t = Clock::now();
        try {
            if (options_.enforcer_data) {
                live.port = std::make_shared<enforcer::DataClient>(*options_.enforcer_data);
                live.port->attach(*record.rac_address);
            }
            live.supplicant = std::move(step2.supplicant);
            record.state = ContainerRecord::State::Running;
        } catch (const Error& e) {
            spdlog::error("cmd: launch of {} failed: {}", container_id, e.what());
            step2.supplicant->logoff();
            addresses_.release(*record.rac_address);
            live = {};
            record.state = ContainerRecord::State::Denied;
            record.deny_reason = "launch-failed";
        }
        latency.launch_ms = ms_since(t);
    } else {
        record.state = ContainerRecord::State::Denied;
        record.deny_reason = step2.deny_reason;
        record.cazd.reset();
    }
    latency.total_ms = ms_since(t0);
    record.latency = latency;
    spdlog::info("cmd: {} {} user={} addr={} total={:.1f}ms", container_id, to_string(record.state), user_name,
                 record.rac_address ? record.rac_address->to_string() : "-", latency.total_ms);

    std::lock_guard lock(mutex_);
    records_[container_id] = record;
    if (record.state == ContainerRecord::State::Running) live_[container_id] = std::move(live);
    busy_.erase(container_id);
    return record;
}

ContainerRecord ContainerManager::run(const std::string& image_name, const std::string& user_name,
                                      const std::string& password) {
    return start(create(image_name), user_name, password);
}

ContainerRecord ContainerManager::stop(const std::string& container_id) {
    Live live;
    ContainerRecord record;
    {
        std::lock_guard lock(mutex_);
        auto it = records_.find(container_id);
        if (it == records_.end()) throw Error("no such container: " + container_id);
        if (busy_.contains(container_id) || it->second.state != ContainerRecord::State::Running)
            throw Error("container " + container_id + " is " + to_string(it->second.state));
        it->second.state = ContainerRecord::State::Stopped;
        record = it->second;
        auto l = live_.find(container_id);
        if (l != live_.end()) {
            live = std::move(l->second);
            live_.erase(l);
        }
    }
    if (live.supplicant) live.supplicant->logoff();
    live.port.reset();
    if (record.rac_address) addresses_.release(*record.rac_address);
    spdlog::info("cmd: {} stopped", container_id);
    return record;
}

std::vector<ContainerRecord> ContainerManager::list() const {
    std::lock_guard lock(mutex_);
    std::vector<ContainerRecord> out;
    for (const auto& [id, r] : records_) out.push_back(r);
    return out;
}

std::optional<ContainerRecord> ContainerManager::find(const std::string& container_id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(container_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

enforcer::FetchResult ContainerManager::fetch(const std::string& container_id, const net::Ipv6Address& dst,
                                              const std::string& request) {
    std::shared_ptr<enforcer::DataClient> port;
    net::Ipv6Address src = options_.host_address;
    {
        std::lock_guard lock(mutex_);
        if (container_id.empty()) {
            port = host_port_;
        } else {
            auto r = records_.find(container_id);
            if (r == records_.end()) throw Error("no such container: " + container_id);
            if (!r->second.rac_address) throw Error("container " + container_id + " has no address");
            src = *r->second.rac_address;
            auto l = live_.find(container_id);
            // a stopped container's traffic still leaves through a port; the
            // enforcer decides whether it goes anywhere
            if (l != live_.end()) port = l->second.port;
        }
    }
    if (!port) {
        if (!options_.enforcer_data) return {enforcer::FetchStatus::Unreachable, {}};
        auto transient = enforcer::DataClient(*options_.enforcer_data);
        return transient.fetch(src, dst, request);
    }
    return port->fetch(src, dst, request);
}

// --- control service -----------------------------------------------------------

namespace {

Json record_to_json(const ContainerRecord& r) {
    Json j{{"id", r.container_id},
           {"image", r.image_name},
           {"user", r.user_name},
           {"state", to_string(r.state)},
           {"latency",
            {{"digest_ms", r.latency.digest_ms},
             {"aa_ms", r.latency.aa_ms},
             {"launch_ms", r.latency.launch_ms},
             {"total_ms", r.latency.total_ms}}}};
    j["addr"] = r.rac_address ? Json(r.rac_address->to_string()) : Json(nullptr);
    if (!r.deny_reason.empty()) j["reason"] = r.deny_reason;
    if (r.cazd) {
        Json peers = Json::array();
        for (const auto& p : r.cazd->allowed_peers) peers.push_back(p.to_string());
        j["cazd"] = {{"rac", r.cazd->rac_address ? r.cazd->rac_address->to_string() : std::string()},
                     {"peers", peers},
                     {"image", r.cazd->image_name}};
    }
    return j;
}

ContainerRecord record_from_json(const Json& j) {
    ContainerRecord r;
    r.container_id = j.at("id").get<std::string>();
    r.image_name = j.at("image").get<std::string>();
    r.user_name = j.value("user", std::string());
    auto state = container_state_from_string(j.at("state").get<std::string>());
    if (!state) throw Error("unknown container state");
    r.state = *state;
    if (j.contains("addr") && j["addr"].is_string()) r.rac_address = net::Ipv6Address::parse(j["addr"].get<std::string>());
    r.deny_reason = j.value("reason", std::string());
    if (j.contains("cazd")) {
        radius::CazdAttributes c;
        const auto& cj = j["cazd"];
        if (auto rac = cj.value("rac", std::string()); !rac.empty()) c.rac_address = net::Ipv6Address::parse(rac);
        for (const auto& p : cj.at("peers")) c.allowed_peers.push_back(net::Ipv6Prefix::parse(p.get<std::string>()));
        c.image_name = cj.value("image", std::string());
        r.cazd = c;
    }
    const auto& l = j.at("latency");
    r.latency = {l.at("digest_ms").get<double>(), l.at("aa_ms").get<double>(), l.at("launch_ms").get<double>(),
                 l.at("total_ms").get<double>()};
    return r;
}

}  // namespace

CmdService::CmdService(ContainerManager& manager, const net::Endpoint& control)
    : manager_(manager), listener_(net::TcpListener::bind(control)), endpoint_(listener_.local_endpoint()) {
    thread_ = std::thread([this] { accept_loop(); });
    spdlog::info("cmd: control on {}", endpoint_.to_string());
}

CmdService::~CmdService() { stop(); }

void CmdService::stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(workers_mutex_);
    for (auto& [stream, t] : workers_) stream->shutdown();
    for (auto& [stream, t] : workers_)
        if (t.joinable()) t.join();
    workers_.clear();
}

void CmdService::accept_loop() {
    while (!stopping_) {
        auto accepted = listener_.accept(std::chrono::milliseconds(200));
        if (!accepted) continue;
        auto stream = std::make_shared<net::LineStream>(std::move(*accepted));
        std::lock_guard lock(workers_mutex_);
        if (stopping_) return;
        workers_.emplace_back(stream, std::thread([this, stream] {
                                  try {
                                      serve(*stream);
                                  } catch (const std::exception& e) {
                                      spdlog::debug("cmd: control connection closed: {}", e.what());
                                  }
                              }));
    }
}

void CmdService::serve(net::LineStream& stream) {
    while (auto line = stream.read_line()) {
        Json reply;
        try {
            Json req = Json::parse(*line);
            const auto op = req.at("op").get<std::string>();
            if (op == "start") {
                auto record = manager_.run(req.at("image").get<std::string>(), req.at("user").get<std::string>(),
                                           req.at("password").get<std::string>());
                reply = detail::ok_reply();
                reply["container"] = record_to_json(record);
            } else if (op == "stop") {
                reply = detail::ok_reply();
                reply["container"] = record_to_json(manager_.stop(req.at("id").get<std::string>()));
            } else if (op == "list") {
                Json list = Json::array();
                for (const auto& r : manager_.list()) list.push_back(record_to_json(r));
                reply = detail::ok_reply();
                reply["containers"] = std::move(list);
            } else if (op == "fetch") {
                auto from = req.value("from", std::string("host"));
                auto result = manager_.fetch(from == "host" ? std::string() : from,
                                             net::Ipv6Address::parse(req.at("dst").get<std::string>()),
                                             req.value("req", std::string()));
                reply = detail::ok_reply();
                reply["status"] = enforcer::to_string(result.status);
                if (result.status == enforcer::FetchStatus::Ok) reply["resp"] = result.response;
            } else {
                reply = detail::error_reply("unknown op " + op);
            }
        } catch (const std::exception& e) {
            reply = detail::error_reply(e.what());
        }
        stream.write_line(reply.dump());
    }
}

CmdClient::CmdClient(const net::Endpoint& control) : stream_(net::LineStream::connect(control)) {}

std::string CmdClient::call(const std::string& request) {
    std::lock_guard lock(mutex_);
    stream_.write_line(request);
    // a start may sit out a full authentication timeout
    auto line = stream_.read_line(std::chrono::seconds(60));
    if (!line) throw Error("cmd closed the control connection");
    return *line;
}

namespace {

Json checked(const std::string& line) {
    Json reply = Json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw Error("unparsable cmd reply");
    if (!reply.value("ok", false)) throw Error(reply.value("error", std::string("refused")));
    return reply;
}

}  // namespace

ContainerRecord CmdClient::start(const std::string& image, const std::string& user, const std::string& password) {
    auto reply =
        checked(call(Json{{"op", "start"}, {"image", image}, {"user", user}, {"password", password}}.dump()));
    return record_from_json(reply.at("container"));
}

ContainerRecord CmdClient::stop(const std::string& container_id) {
    return record_from_json(checked(call(Json{{"op", "stop"}, {"id", container_id}}.dump())).at("container"));
}

std::vector<ContainerRecord> CmdClient::list() {
    auto reply = checked(call(Json{{"op", "list"}}.dump()));
    std::vector<ContainerRecord> out;
    for (const auto& j : reply.at("containers")) out.push_back(record_from_json(j));
    return out;
}

enforcer::FetchResult CmdClient::fetch(const std::string& from, const net::Ipv6Address& dst,
                                       const std::string& request) {
    auto reply = checked(call(
        Json{{"op", "fetch"}, {"from", from.empty() ? "host" : from}, {"dst", dst.to_string()}, {"req", request}}
            .dump()));
    auto status = enforcer::fetch_status_from_string(reply.at("status").get<std::string>());
    if (!status) throw Error("unknown fetch status");
    return {*status, reply.value("resp", std::string())};
}

}  // namespace xrac::host
