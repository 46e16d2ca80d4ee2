// bdl: operator command line for providers, the gateway and the simulation harness.

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "bdl/codecs.hpp"
#include "bdl/corpus.hpp"
#include "bdl/data_provider.hpp"
#include "bdl/gateway.hpp"
#include "bdl/harvester.hpp"
#include "bdl/http.hpp"
#include "bdl/provider_server.hpp"
#include "bdl/registry.hpp"
#include "bdl/scenario.hpp"
#include "bdl/union_index.hpp"

namespace {

using namespace bdl;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

const std::chrono::milliseconds kApiTimeout{60000};

struct Failure : std::runtime_error {
    Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
    int code;
};

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failure(kFailure, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Blocks SIGINT and SIGTERM in every thread started afterwards so that
// wait_for_signal() can collect them synchronously.
sigset_t block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

json api_json(const http::Response& res) {
    json body = json::parse(res.body, nullptr, false);
    if (res.status >= 400) {
        const std::string msg = body.is_object() && body.contains("error") ? body["error"].get<std::string>() : res.body;
        throw Failure(res.status == 400 ? kUsage : kFailure, msg);
    }
    if (body.is_discarded()) throw Failure(kFailure, "gateway answered with malformed JSON");
    return body;
}

std::string url_encode(const std::string& s) {
    std::ostringstream out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') out << c;
        else out << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
    }
    return out.str();
}

int print_job(const json& job) {
    std::cout << job.dump(2) << "\n";
    return job.value("state", "") == "succeeded" ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated digital-library gateway"};
    app.require_subcommand(1);
    std::string gateway_url = "http://127.0.0.1:8080";
    app.add_option("--gateway", gateway_url, "Gateway base URL for operator commands");

    // provider serve
    auto* provider = app.add_subcommand("provider", "Data provider");
    provider->require_subcommand(1);
    auto* provider_serve = provider->add_subcommand("serve", "Serve a repository");
    std::string provider_config;
    provider_serve->add_option("--config", provider_config, "Repository config (JSON)")->required()->check(CLI::ExistingFile);

    // gateway serve
    auto* gateway = app.add_subcommand("gateway", "Gateway");
    gateway->require_subcommand(1);
    auto* gateway_serve = gateway->add_subcommand("serve", "Serve the gateway API");
    std::string registry_file;
    std::string listen = "127.0.0.1:8080";
    std::string data_dir = "bdl-data";
    bool no_schedule = false;
    gateway_serve->add_option("--registry", registry_file, "Provider registry file")->required();
    gateway_serve->add_option("--listen", listen, "host:port");
    gateway_serve->add_option("--data-dir", data_dir, "Union index and harvest state directory");
    gateway_serve->add_flag("--no-schedule", no_schedule, "Disable periodic harvesting");

    // harvest
    auto* harvest = app.add_subcommand("harvest", "Harvest jobs");
    harvest->require_subcommand(1);
    auto* harvest_run = harvest->add_subcommand("run", "Run a harvest and wait for it");
    std::string harvest_id;
    bool harvest_full = false;
    harvest_run->add_option("providerId", harvest_id)->required();
    harvest_run->add_flag("--full", harvest_full, "Full instead of incremental");
    auto* harvest_status = harvest->add_subcommand("status", "Jobs and checkpoints");

    // ingest-files
    auto* ingest = app.add_subcommand("ingest-files", "Ingest HTML and tagged-text files");
    std::string ingest_dir;
    std::string ingest_as;
    ingest->add_option("dir", ingest_dir)->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--as", ingest_as, "Virtual provider id")->required();

    // search
    auto* search = app.add_subcommand("search", "Unified search");
    std::string query;
    std::size_t start = 0;
    std::size_t max = 10;
    bool search_json = false;
    search->add_option("query", query)->required();
    search->add_option("--start", start);
    search->add_option("--max", max)->check(CLI::PositiveNumber);
    search->add_flag("--json", search_json, "Print the raw response");

    // registry
    auto* registry = app.add_subcommand("registry", "Provider registry");
    registry->require_subcommand(1);
    auto* registry_add = registry->add_subcommand("add", "Add a provider");
    std::string reg_id;
    std::string reg_url;
    std::vector<std::string> reg_modes;
    std::int64_t reg_poll = 3600;
    registry_add->add_option("providerId", reg_id)->required();
    registry_add->add_option("--url", reg_url, "Provider base URL")->required();
    registry_add->add_option("--modes", reg_modes, "harvest and/or search")->delimiter(',')->required()
        ->check(CLI::IsMember({"harvest", "search"}));
    registry_add->add_option("--poll", reg_poll, "Harvest interval in seconds")->check(CLI::PositiveNumber);
    auto* registry_remove = registry->add_subcommand("remove", "Remove a provider");
    registry_remove->add_option("providerId", reg_id)->required();
    auto* registry_list = registry->add_subcommand("list", "List providers");

    // scenario run
    auto* scenario = app.add_subcommand("scenario", "Simulation harness");
    scenario->require_subcommand(1);
    auto* scenario_run = scenario->add_subcommand("run", "Run a scenario file");
    std::string scenario_file;
    std::optional<std::uint64_t> scenario_seed;
    std::string report_file;
    std::string work_dir;
    scenario_run->add_option("file", scenario_file)->required()->check(CLI::ExistingFile);
    scenario_run->add_option("--seed", scenario_seed);
    scenario_run->add_option("--report", report_file, "Write the report here instead of stdout");
    scenario_run->add_option("--work-dir", work_dir, "Empty directory for provider stores (kept afterwards)");

    // corpus gen
    auto* corpus = app.add_subcommand("corpus", "Synthetic corpora");
    corpus->require_subcommand(1);
    auto* corpus_gen = corpus->add_subcommand("gen", "Write tagged-text records");
    std::uint64_t corpus_seed = 0;
    std::size_t corpus_n = 0;
    std::string corpus_out;
    corpus_gen->add_option("--seed", corpus_seed)->required();
    corpus_gen->add_option("--n", corpus_n)->required();
    corpus_gen->add_option("--out", corpus_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (provider_serve->parsed()) {
            const auto signals = block_signals();
            Repository repo(repository_config_from_json(json::parse(read_text(provider_config))));
            SystemClock clock;
            ProviderServer server(repo, clock);
            server.start();
            std::cout << "provider " << repo.config().repository_id << " listening on " << server.base_url() << std::endl;
            wait_for_signal(signals);
            server.stop();
            return kOk;
        }

        if (gateway_serve->parsed()) {
            const auto signals = block_signals();
            std::filesystem::create_directories(data_dir);
            UnionIndex index(std::filesystem::path(data_dir) / "union");
            ProviderRegistry reg(registry_file);
            Harvester harvester(index, std::make_shared<HttpHarvestTransport>(),
                                std::filesystem::path(data_dir) / "harvester.json");
            SystemClock clock;
            Gateway gw(index, reg, harvester, clock);
            GatewayServer server(gw);
            server.start(listen);
            if (!no_schedule) harvester.start_scheduler([&reg] { return reg.snapshot(); });
            std::cout << "gateway listening on " << server.base_url() << std::endl;
            wait_for_signal(signals);
            harvester.stop_scheduler();
            server.stop();
            harvester.drain();
            return kOk;
        }

        if (harvest_run->parsed()) {
            const auto path = "/api/harvest/" + url_encode(harvest_id) + "/run?kind=" + (harvest_full ? "full" : "incremental");
            const json queued = api_json(http::post(gateway_url, path, "", "application/json", kApiTimeout));
            const auto job_id = queued.at("jobId").get<std::uint64_t>();
            for (;;) {
                const json job = api_json(http::get(gateway_url, "/api/harvest/jobs/" + std::to_string(job_id), {}, kApiTimeout));
                const std::string state = job.value("state", "");
                if (state == "succeeded" || state == "failed") return print_job(job);
                std::this_thread::sleep_for(std::chrono::milliseconds(200));
            }
        }

        if (harvest_status->parsed()) {
            json out = api_json(http::get(gateway_url, "/api/harvest/jobs", {}, kApiTimeout));
            out["checkpoints"] = api_json(http::get(gateway_url, "/api/checkpoints", {}, kApiTimeout))["checkpoints"];
            std::cout << out.dump(2) << "\n";
            return kOk;
        }

        if (ingest->parsed()) {
            const json body = {{"directory", std::filesystem::absolute(ingest_dir).string()}, {"providerId", ingest_as}};
            const auto res = http::post(gateway_url, "/api/ingest", body.dump(), "application/json", kApiTimeout);
            if (res.status == 422) return print_job(json::parse(res.body));
            return print_job(api_json(res));
        }

        if (search->parsed()) {
            const auto res = api_json(http::get(gateway_url, "/api/search",
                                                {{"q", query}, {"start", std::to_string(start)}, {"max", std::to_string(max)}},
                                                kApiTimeout));
            if (search_json) {
                std::cout << res.dump(2) << "\n";
                return kOk;
            }
            std::size_t n = start;
            for (const auto& r : res["results"]) {
                const auto record = record_from_json(r["record"]);
                const auto* title = record.first(Element::title);
                std::cout << ++n << ". " << (title ? title->value : std::string("(untitled)")) << "  [score "
                          << r["score"].get<double>() << "]\n";
                for (const auto& s : r["sources"])
                    std::cout << "     " << s["provider"].get<std::string>() << " #" << s["rank"].get<std::size_t>() << "  "
                              << s["identifier"].get<std::string>() << "\n";
            }
            std::cout << res["total"].get<std::size_t>() << " results";
            if (res["partial"].get<bool>()) {
                std::cout << " (partial:";
                for (const auto& o : res["outcomes"])
                    if (o["status"] != "ok") std::cout << " " << o["provider"].get<std::string>() << "=" << o["status"].get<std::string>();
                std::cout << ")";
            }
            std::cout << "\n";
            return kOk;
        }

        if (registry_add->parsed()) {
            ProviderDescriptor d;
            d.provider_id = reg_id;
            d.base_url = reg_url;
            d.poll_interval = reg_poll;
            for (const auto& m : reg_modes) (m == "harvest" ? d.harvest : d.search) = true;
            const auto res = http::post(gateway_url, "/api/providers", to_json(d).dump(), "application/json", kApiTimeout);
            if (res.status == 409) throw Failure(kFailure, json::parse(res.body).value("error", res.body));
            std::cout << api_json(res).dump(2) << "\n";
            return kOk;
        }

        if (registry_remove->parsed()) {
            const auto res = http::del(gateway_url, "/api/providers/" + url_encode(reg_id), kApiTimeout);
            if (res.status >= 400) throw Failure(kFailure, json::parse(res.body, nullptr, false).value("error", res.body));
            return kOk;
        }

        if (registry_list->parsed()) {
            std::cout << api_json(http::get(gateway_url, "/api/providers", {}, kApiTimeout)).dump(2) << "\n";
            return kOk;
        }

        if (scenario_run->parsed()) {
            Scenario sc;
            try {
                sc = parse_scenario(read_text(scenario_file));
            } catch (const ScenarioError& e) {
                throw Failure(kUsage, scenario_file + ": " + e.what());
            }
            const std::uint64_t seed = scenario_seed.value_or(sc.seed.value_or(0));
            std::filesystem::path dir = work_dir;
            const bool temporary = dir.empty();
            if (temporary) {
                std::string tmpl = (std::filesystem::temp_directory_path() / "bdl-scenario-XXXXXX").string();
                if (!mkdtemp(tmpl.data())) throw Failure(kFailure, "cannot create a temporary directory");
                dir = tmpl;
            }
            ScenarioReport report;
            try {
                report = run_scenario(sc, seed, dir);
            } catch (...) {
                if (temporary) std::filesystem::remove_all(dir);
                throw;
            }
            if (temporary) std::filesystem::remove_all(dir);
            const std::string text = report.document.dump(2) + "\n";
            if (report_file.empty()) {
                std::cout << text;
            } else {
                std::ofstream(report_file) << text;
            }
            return report.passed ? kOk : kFailure;
        }

        if (corpus_gen->parsed()) {
            std::filesystem::create_directories(corpus_out);
            const auto items = generate_corpus(corpus_seed, corpus_n);
            for (std::size_t i = 0; i < items.size(); ++i) {
                std::ostringstream name;
                name << "record-" << std::setw(6) << std::setfill('0') << i << ".txt";
                std::ofstream out(std::filesystem::path(corpus_out) / name.str(), std::ios::binary);
                out << format_tagged_text(items[i].record);
                if (!out) throw Failure(kFailure, "cannot write " + name.str());
            }
            std::cout << items.size() << " records written to " << corpus_out << "\n";
            return kOk;
        }
    } catch (const Failure& e) {
        std::cerr << "bdl: " << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "bdl: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
