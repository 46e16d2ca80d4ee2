#include <doctest.h>

#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "bdl/corpus.hpp"
#include "bdl/codecs.hpp"
#include "bdl/json_codec.hpp"
#include "support.hpp"

using namespace bdl;

namespace {

const std::string kCli = BDL_CLI_PATH;
const std::filesystem::path kScenarios = BDL_SCENARIO_DIR;

struct Run {
    int code = -1;
    std::string out;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run run(const std::vector<std::string>& args) {
    std::string cmd = quote(kCli);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// A long-running `bdl ... serve` child; the base URL is read from its banner.
class Server {
public:
    explicit Server(const std::vector<std::string>& args) {
        int fds[2];
        REQUIRE(pipe(fds) == 0);
        pid_ = fork();
        REQUIRE(pid_ >= 0);
        if (pid_ == 0) {
            dup2(fds[1], STDOUT_FILENO);
            close(fds[0]);
            close(fds[1]);
            std::vector<char*> argv{const_cast<char*>(kCli.c_str())};
            for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            execv(kCli.c_str(), argv.data());
            _exit(127);
        }
        close(fds[1]);
        out_ = fdopen(fds[0], "r");
        char line[512] = {};
        REQUIRE(fgets(line, sizeof line, out_));
        const std::string banner = line;
        const auto at = banner.find("http://");
        REQUIRE(at != std::string::npos);
        url_ = banner.substr(at, banner.find_first_of("\r\n", at) - at);
    }
    ~Server() {
        if (pid_ > 0) stop();
        if (out_) fclose(out_);
    }
    int stop() {
        kill(pid_, SIGTERM);
        int status = 0;
        waitpid(pid_, &status, 0);
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    const std::string& url() const { return url_; }

private:
    pid_t pid_ = -1;
    FILE* out_ = nullptr;
    std::string url_;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"search"}).code == 2);
    CHECK(run({"search", "x", "--max", "0"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("corpus gen") {
    testing::TempDir dir;
    const auto r = run({"corpus", "gen", "--seed", "42", "--n", "5", "--out", (dir / "c").string()});
    CHECK(r.code == 0);
    for (std::size_t i = 0; i < 5; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "record-%06zu.txt", i);
        const auto parsed = parse_tagged_text(slurp(dir / "c" / name));
        REQUIRE(parsed.size() == 1);
        MetadataRecord expected = generate_item(42, i).record;
        for (auto& s : expected.statements) {
            s.scheme.reset();
            s.language.reset();
        }
        CHECK(parsed[0].record == expected);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "c" / "record-000005.txt"));
    CHECK(run({"corpus", "gen", "--seed", "42", "--n", "0", "--out", (dir / "empty").string()}).code == 0);
    CHECK(std::filesystem::is_empty(dir / "empty"));
}

TEST_CASE("scenario run") {
    testing::TempDir dir;
    const auto report_path = (dir / "report.json").string();
    CHECK(run({"scenario", "run", (kScenarios / "basic.scn").string(), "--report", report_path}).code == 0);
    const auto report = json::parse(slurp(report_path));
    CHECK(report["passed"] == true);
    CHECK(report["seed"] == 7);

    const auto out = run({"scenario", "run", (kScenarios / "basic.scn").string(), "--seed", "8", "--work-dir", (dir / "w").string()});
    CHECK(out.code == 0);
    CHECK(json::parse(out.out)["seed"] == 8);
    CHECK(std::filesystem::exists(dir / "w" / "union"));

    std::ofstream(dir / "fail.scn") << "start-provider a\nsubmit a 2\nharvest a full\nassert union-size 5\n";
    CHECK(run({"scenario", "run", (dir / "fail.scn").string()}).code == 1);
    std::ofstream(dir / "bad.scn") << "teleport a\n";
    CHECK(run({"scenario", "run", (dir / "bad.scn").string()}).code == 2);
}

TEST_CASE("operator commands against a live gateway and provider") {
    testing::TempDir dir;
    std::ofstream(dir / "rep1.json") << json{{"repositoryId", "rep1"}, {"listenAddress", "127.0.0.1:0"},
                                              {"dataDir", (dir / "rep1").string()}, {"pageSize", 2}}.dump();
    Server provider({"provider", "serve", "--config", (dir / "rep1.json").string()});
    Server gateway({"gateway", "serve", "--registry", (dir / "registry.json").string(), "--listen", "127.0.0.1:0",
                    "--data-dir", (dir / "gw").string(), "--no-schedule"});
    const std::string gw = gateway.url();

    httplib::Client cli(provider.url());
    for (const auto& item : generate_corpus(3, 5, {0, 0, 0, 0, 1})) {
        const json meta = {{"kind", "generic"}, {"metadata", to_json(item.record)}};
        const auto res = cli.Post("/submit", httplib::MultipartFormDataItems{{"metadata", meta.dump(), "", "application/json"}});
        REQUIRE(res);
        REQUIRE(res->status == 201);
    }

    CHECK(run({"--gateway", gw, "registry", "add", "rep1", "--url", provider.url(), "--modes", "harvest,search"}).code == 0);
    CHECK(run({"--gateway", gw, "registry", "add", "rep1", "--url", provider.url(), "--modes", "harvest"}).code == 1);
    CHECK(run({"--gateway", gw, "registry", "add", "x", "--url", provider.url(), "--modes", "browse"}).code == 2);
    CHECK(json::parse(run({"--gateway", gw, "registry", "list"}).out)["providers"].size() == 1);

    auto r = run({"--gateway", gw, "harvest", "run", "rep1", "--full"});
    CHECK(r.code == 0);
    const auto job = json::parse(r.out);
    CHECK(job["state"] == "succeeded");
    CHECK(job["counts"]["upserted"] == 5);
    CHECK(run({"--gateway", gw, "harvest", "run", "nobody"}).code == 1);

    r = run({"--gateway", gw, "search", "for", "--json"});
    CHECK(r.code == 0);
    const auto found = json::parse(r.out);
    CHECK(found["total"] == 5);
    CHECK(found["partial"] == false);
    for (const auto& m : found["results"]) CHECK(m["sources"].size() == 2);
    r = run({"--gateway", gw, "search", "for", "--max", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("5 results") != std::string::npos);
    CHECK(r.out.find("rep1 #") != std::string::npos);
    CHECK(run({"--gateway", gw, "search", "title:(a"}).code == 2);

    std::filesystem::create_directories(dir / "files");
    std::ofstream(dir / "files" / "a.html") << "<meta name=\"DC.Title\" content=\"Arquivo local\">";
    r = run({"--gateway", gw, "ingest-files", (dir / "files").string(), "--as", "local"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["counts"]["upserted"] == 1);

    r = run({"--gateway", gw, "harvest", "status"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["checkpoints"][0]["providerId"] == "rep1");

    CHECK(run({"--gateway", gw, "registry", "remove", "rep1"}).code == 0);
    CHECK(run({"--gateway", gw, "registry", "remove", "rep1"}).code == 1);
    CHECK(gateway.stop() == 0);
    CHECK(provider.stop() == 0);
    CHECK(run({"--gateway", gw, "search", "for"}).code == 1);

    // the gateway comes back with its union index and harvest history
    Server again({"gateway", "serve", "--registry", (dir / "registry.json").string(), "--listen", "127.0.0.1:0",
                  "--data-dir", (dir / "gw").string(), "--no-schedule"});
    const auto after = json::parse(run({"--gateway", again.url(), "search", "for", "--json"}).out);
    CHECK(after["total"] == 5);
    CHECK(json::parse(run({"--gateway", again.url(), "harvest", "status"}).out)["jobs"].size() == 2);
}
