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

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "xrac/auth_server.hpp"
#include "xrac/authenticator.hpp"
#include "xrac/cmd.hpp"
#include "xrac/enforcer.hpp"
#include "xrac/errors.hpp"
#include "xrac/harness.hpp"

namespace {

using namespace xrac;

constexpr const char* kDefaultCtl = "127.0.0.1:5996";

// stdout is reserved for readiness lines and command output
void setup_logging(const std::string& level, const std::string& file) {
    std::shared_ptr<spdlog::logger> logger;
    if (file.empty()) logger = spdlog::stderr_color_mt("xrac");
    else logger = spdlog::basic_logger_mt("xrac", file);
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(level));
    spdlog::flush_on(spdlog::level::info);
}

void announce(const harness::ReadyLine& ready) {
    std::printf("%s\n", harness::format_ready(ready).c_str());
    std::fflush(stdout);
}

/// Blocks the termination signals in every thread; wait_for_exit() then
/// collects them synchronously.
sigset_t block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGHUP);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_exit(const sigset_t& set, const std::function<void()>& on_hup = {}) {
    for (;;) {
        int sig = 0;
        if (sigwait(&set, &sig) != 0) continue;
        if (sig == SIGHUP) {
            if (on_hup) on_hup();
            continue;
        }
        spdlog::info("signal {}, shutting down", sig);
        return;
    }
}

std::vector<enforcer::WhitelistPair> parse_pairs(const std::vector<std::string>& specs) {
    std::vector<enforcer::WhitelistPair> out;
    for (const auto& s : specs) {
        const auto comma = s.find(',');
        if (comma == std::string::npos) throw ParseError("static pair '" + s + "' must be <a>,<b>");
        out.emplace_back(net::Ipv6Prefix::parse(s.substr(0, comma)), net::Ipv6Prefix::parse(s.substr(comma + 1)));
    }
    return out;
}

std::string describe(const host::ContainerRecord& r) {
    std::string s = r.container_id + " " + r.image_name + " " + host::to_string(r.state);
    if (r.rac_address && r.state != host::ContainerRecord::State::Denied) s += " rac=" + r.rac_address->to_string();
    if (!r.deny_reason.empty()) s += " reason=" + r.deny_reason;
    return s;
}

void print_matrix_diff(const harness::ScenarioReport& report) {
    for (const auto& d : report.deviations) std::cerr << "deviation: " << d << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xrac: container authentication and authorization testbed"};
    app.require_subcommand(1);
    std::string log_level = "info";
    std::string log_file;

    auto add_logging = [&](CLI::App* sub) {
        sub->add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();
    };

    // as
    auto* as_cmd = app.add_subcommand("as", "Run the authentication server");
    std::string as_bind = "127.0.0.1:1812", secret, store;
    as_cmd->add_option("--bind", as_bind)->capture_default_str();
    as_cmd->add_option("--secret", secret)->required();
    as_cmd->add_option("--store", store)->required();
    as_cmd->add_option("--log", log_file, "write the log to a file");
    add_logging(as_cmd);

    // ca
    auto* ca_cmd = app.add_subcommand("ca", "Run the container authenticator");
    std::string ca_frontend = "[::]:5995", ca_as, ca_enforcer;
    ca_cmd->add_option("--frontend", ca_frontend)->capture_default_str();
    ca_cmd->add_option("--as", ca_as)->required();
    ca_cmd->add_option("--secret", secret)->required();
    ca_cmd->add_option("--enforcer", ca_enforcer, "enforcer control endpoint")->required();
    add_logging(ca_cmd);

    // cmd
    auto* cmd_cmd = app.add_subcommand("cmd", "Run the container management daemon");
    std::string subnet = "2001:db8::11:0/116", host_address = "2001:db8::11:fff", cmd_ca, images, cmd_enforcer;
    std::string ctl = kDefaultCtl;
    cmd_cmd->add_option("--subnet", subnet)->capture_default_str();
    cmd_cmd->add_option("--host-address", host_address)->capture_default_str();
    cmd_cmd->add_option("--ca", cmd_ca)->required();
    cmd_cmd->add_option("--images", images)->required();
    cmd_cmd->add_option("--enforcer-data", cmd_enforcer, "enforcer data endpoint");
    cmd_cmd->add_option("--ctl", ctl, "control socket")->capture_default_str();
    add_logging(cmd_cmd);

    // enforcer
    auto* enf_cmd = app.add_subcommand("enforcer", "Run the network enforcer");
    std::string enf_data = "127.0.0.1:5997", enf_control = "127.0.0.1:5998";
    std::vector<std::string> statics;
    enf_cmd->add_option("--data", enf_data)->capture_default_str();
    enf_cmd->add_option("--control", enf_control)->capture_default_str();
    enf_cmd->add_option("--static", statics, "static pair <a>,<b> (repeatable)");
    add_logging(enf_cmd);

    // servers
    auto* srv_cmd = app.add_subcommand("servers", "Run the protected and public stub web servers");
    std::string srv_enforcer, protected_addr = "2001:db8::aa:0", public_addr = "2001:db8::bb:0";
    std::string protected_content = "protected content", public_content = "public content";
    srv_cmd->add_option("--enforcer-data", srv_enforcer)->required();
    srv_cmd->add_option("--protected", protected_addr)->capture_default_str();
    srv_cmd->add_option("--protected-content", protected_content)->capture_default_str();
    srv_cmd->add_option("--public", public_addr)->capture_default_str();
    srv_cmd->add_option("--public-content", public_content)->capture_default_str();
    add_logging(srv_cmd);

    // ctl
    auto* ctl_cmd = app.add_subcommand("ctl", "Talk to a running container management daemon");
    ctl_cmd->require_subcommand(1);
    ctl_cmd->add_option("--ctl", ctl, "control socket")->capture_default_str();
    std::string image, user, password, container_id, from = "host", dst, request = "GET /index.html";
    auto* ctl_start = ctl_cmd->add_subcommand("start", "Create and start a container");
    ctl_start->add_option("image", image)->required();
    ctl_start->add_option("--user", user)->required();
    ctl_start->add_option("--password", password)->required();
    auto* ctl_stop = ctl_cmd->add_subcommand("stop", "Stop a running container");
    ctl_stop->add_option("id", container_id)->required();
    auto* ctl_list = ctl_cmd->add_subcommand("list", "List containers");
    auto* ctl_fetch = ctl_cmd->add_subcommand("fetch", "Send a request through the enforcer");
    ctl_fetch->add_option("dst", dst, "destination address")->required();
    ctl_fetch->add_option("--from", from, "'host' or a container id")->capture_default_str();
    ctl_fetch->add_option("--request", request)->capture_default_str();

    // scenario
    auto* sc_cmd = app.add_subcommand("scenario", "Run a scenario against a fresh testbed");
    std::string scenario, config_path, out_path;
    bool distributed = false, as_offline = false;
    sc_cmd->add_option("name", scenario)->required()->check(CLI::IsMember({"validation", "latency"}));
    sc_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    sc_cmd->add_flag("--distributed", distributed, "run every service as its own process");
    sc_cmd->add_flag("--as-offline", as_offline, "leave the AS out (expects denial)");
    sc_cmd->add_option("--out", out_path, "write the JSON report here");
    log_level = "warn";
    add_logging(sc_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        setup_logging(log_level, log_file);

        if (*as_cmd) {
            const auto signals = block_signals();
            as::AuthService service({net::Endpoint::parse(as_bind), secret, store});
            announce({"as", {{"bind", service.endpoint().to_string()}}});
            wait_for_exit(signals, [&] { service.request_reload(); });
            service.stop();
            return 0;
        }
        if (*ca_cmd) {
            const auto signals = block_signals();
            ca::CaService::Options o;
            o.frontend = net::Endpoint::parse(ca_frontend);
            o.auth_server = net::Endpoint::parse(ca_as);
            o.secret = secret;
            o.enforcer_control = net::Endpoint::parse(ca_enforcer);
            ca::CaService service(o);
            announce({"ca", {{"frontend", service.frontend_endpoint().to_string()}}});
            wait_for_exit(signals);
            service.stop();
            return 0;
        }
        if (*cmd_cmd) {
            const auto signals = block_signals();
            host::ContainerManager::Options o;
            o.subnet = net::Ipv6Prefix::parse(subnet);
            o.host_address = net::Ipv6Address::parse(host_address);
            o.authenticator = net::Endpoint::parse(cmd_ca);
            o.images = images;
            if (!cmd_enforcer.empty()) o.enforcer_data = net::Endpoint::parse(cmd_enforcer);
            std::unique_ptr<host::ContainerManager> manager;
            try {
                manager = std::make_unique<host::ContainerManager>(o);
            } catch (const StartupError&) {
                throw;
            } catch (const Error& e) {
                throw StartupError(e.what());
            }
            host::CmdService service(*manager, net::Endpoint::parse(ctl));
            announce({"cmd", {{"ctl", service.endpoint().to_string()}}});
            wait_for_exit(signals);
            service.stop();
            return 0;
        }
        if (*enf_cmd) {
            const auto signals = block_signals();
            enforcer::EnforcerService service(
                {net::Endpoint::parse(enf_data), net::Endpoint::parse(enf_control), parse_pairs(statics)});
            announce({"enforcer",
                      {{"data", service.data_endpoint().to_string()},
                       {"control", service.control_endpoint().to_string()}}});
            wait_for_exit(signals);
            service.stop();
            return 0;
        }
        if (*srv_cmd) {
            const auto signals = block_signals();
            auto content = [](std::string text) {
                return [text](const net::Ipv6Address&, const std::string&) { return text; };
            };
            const auto enforcer_ep = net::Endpoint::parse(srv_enforcer);
            std::unique_ptr<enforcer::ServedEndpoint> prot, pub;
            try {
                prot = std::make_unique<enforcer::ServedEndpoint>(enforcer_ep, net::Ipv6Address::parse(protected_addr),
                                                                  content(protected_content));
                pub = std::make_unique<enforcer::ServedEndpoint>(enforcer_ep, net::Ipv6Address::parse(public_addr),
                                                                 content(public_content));
            } catch (const StartupError&) {
                throw;
            } catch (const Error& e) {
                throw StartupError(e.what());
            }
            announce({"servers", {{"protected", protected_addr}, {"public", public_addr}}});
            wait_for_exit(signals);
            return 0;
        }
        if (*ctl_cmd) {
            host::CmdClient client(net::Endpoint::parse(ctl));
            if (*ctl_start) {
                const auto r = client.start(image, user, password);
                std::cout << describe(r) << "\n";
                if (r.state == host::ContainerRecord::State::Running)
                    std::cout << fmt::format("latency digest={:.1f}ms aa={:.1f}ms launch={:.1f}ms total={:.1f}ms\n",
                                             r.latency.digest_ms, r.latency.aa_ms, r.latency.launch_ms,
                                             r.latency.total_ms);
                return r.state == host::ContainerRecord::State::Running ? 0 : 1;
            }
            if (*ctl_stop) {
                std::cout << describe(client.stop(container_id)) << "\n";
                return 0;
            }
            if (*ctl_list) {
                for (const auto& r : client.list()) std::cout << describe(r) << "\n";
                return 0;
            }
            if (*ctl_fetch) {
                const auto r = client.fetch(from == "host" ? "" : from, net::Ipv6Address::parse(dst), request);
                std::cout << enforcer::to_string(r.status);
                if (r.status == enforcer::FetchStatus::Ok) std::cout << " " << r.response;
                std::cout << "\n";
                return r.status == enforcer::FetchStatus::Ok ? 0 : 1;
            }
        }
        if (*sc_cmd) {
            const auto config = harness::TestbedConfig::load(config_path);
            harness::BootOptions boot;
            boot.mode = distributed ? harness::Mode::Distributed : harness::Mode::InProcess;
            boot.executable = std::filesystem::read_symlink("/proc/self/exe");
            boot.as_offline = as_offline;
            boot.child_log_level = log_level;
            const auto report = scenario == "validation"
                                    ? harness::scenario_validation(config, boot, {as_offline})
                                    : harness::scenario_latency(config, boot);
            const auto json = report.to_json();
            if (out_path.empty()) {
                std::cout << json << "\n";
            } else {
                std::ofstream out(out_path);
                out << json << "\n";
                if (!out) throw Error("cannot write " + out_path);
            }
            print_matrix_diff(report);
            std::cerr << scenario << " (" << report.mode << "): " << (report.passed ? "passed" : "FAILED") << " in "
                      << static_cast<long>(report.elapsed_ms) << " ms\n";
            return report.passed ? 0 : 1;
        }
    } catch (const StartupError& e) {
        std::printf("error %s\n", e.what());
        std::fflush(stdout);
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}
