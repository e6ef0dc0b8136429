#include "qnetsim/harness/report.hpp"
#include "qnetsim/net/generators.hpp"
#include "qnetsim/parallel/simulation.hpp"
#include "qnetsim/partition/anneal.hpp"
#include "qnetsim/qsm/transport.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace qnetsim;
namespace fs = std::filesystem;

namespace
{
    // Exit codes: 1 usage/config, 2 causality violation, 3 anything else at run time.
    int exit_code_for(ErrorCode c)
    {
        return c == ErrorCode::CausalityViolation ? 2 : (c == ErrorCode::SchemaViolation || c == ErrorCode::InvalidParameter ? 1 : 3);
    }

    fs::path ensure_dir(const std::string& dir)
    {
        fs::path p(dir);
        fs::create_directories(p);
        return p;
    }

    void write_json(const fs::path& path, const nlohmann::json& j)
    {
        std::ofstream out(path);
        if (!out)
            throw Error(ErrorCode::InvalidParameter, "cannot write " + path.string());
        out << j.dump(2) << '\n';
    }

    struct GenOpts
    {
        std::string kind = "linear";
        std::uint32_t routers = 16;
        double link_length = 2000.0;
        std::uint32_t memories = 16;
        std::uint32_t groups = 4;
        std::uint32_t per_group = 4;
        double density = 0.5;
        std::uint32_t hotspot = 0;
        std::uint64_t seed = 1;
        double attenuation = 0.2;
        std::uint64_t period_ps = 1'000'000;
        std::uint32_t frame_photons = 32;
        std::uint32_t target_bits = 64;
        std::uint32_t max_frames = 16;
        std::string out = ".";
    };

    struct PartOpts
    {
        std::string topology;
        std::size_t workers = 2;
        std::string method = "anneal";
        double w_flows = 0.0;
        double w_qchannels = 1.0;
        double w_memory = 0.0;
        double t0 = 10.0;
        double alpha = 0.995;
        std::uint64_t iterations = 50'000;
        std::uint32_t restarts = 1;
        std::uint64_t seed = 1;
        std::string out = ".";
    };

    struct RunOpts
    {
        std::string topology;
        std::string partition;
        std::size_t workers = 0; // 0: take it from the partition file
        std::optional<std::uint64_t> seed;
        std::optional<std::uint64_t> stop_time;
        std::string qsm_transport = "inproc";
        std::string qsm_addr;
        std::string worker_transport = "threads";
        std::optional<std::uint64_t> lookahead;
        std::string out = ".";
    };

    par::RunConfig run_config(const RunOpts& o, const net::Topology& t)
    {
        par::RunConfig cfg;
        cfg.seed = o.seed.value_or(t.seed);
        if (o.stop_time)
            cfg.stop_time = SimTime{*o.stop_time};
        cfg.qsm = o.qsm_transport == "socket" ? par::QsmTransport::Socket : par::QsmTransport::InProc;
        if (!o.qsm_addr.empty())
        {
            cfg.qsm_addr = net_io::parse_endpoint(o.qsm_addr);
            cfg.qsm = par::QsmTransport::Socket;
        }
        if (o.worker_transport == "socket")
            cfg.transport = par::WorkerTransport::Socket;
        else if (o.worker_transport == "process")
            cfg.transport = par::WorkerTransport::Process;
        if (o.lookahead)
            cfg.lookahead = SimTime{*o.lookahead};
        return cfg;
    }

    part::Partition partition_or_round_robin(const RunOpts& o, const net::Topology& t)
    {
        if (!o.partition.empty())
        {
            part::Partition p = part::load_partition(o.partition, t.routers.size());
            if (o.workers != 0 && o.workers != p.num_workers)
                throw Error(ErrorCode::InvalidParameter, "--workers " + std::to_string(o.workers) + " disagrees with " +
                                                             o.partition + " (" + std::to_string(p.num_workers) + " workers)");
            return p;
        }
        return part::Partition::round_robin(t.routers.size(), o.workers == 0 ? 1 : o.workers);
    }

    int cmd_gen(const GenOpts& o)
    {
        net::WorkloadParams w;
        w.attenuation_db_per_km = o.attenuation;
        w.period = SimTime{o.period_ps};
        w.frame_photons = o.frame_photons;
        w.target_bits = o.target_bits;
        w.max_frames = o.max_frames;
        net::Topology t;
        if (o.kind == "linear")
        {
            net::LinearParams p;
            p.routers = o.routers;
            p.link_length_m = o.link_length;
            p.memories = o.memories;
            p.seed = o.seed;
            p.workload = w;
            t = net::gen_linear(p);
        }
        else
        {
            net::AsParams p;
            p.groups = o.groups;
            p.routers_per_group = o.per_group;
            p.session_density = o.density;
            p.hotspot_sessions = o.hotspot;
            p.seed = o.seed;
            p.workload = w;
            t = net::gen_as(p);
        }
        const fs::path path = ensure_dir(o.out) / "topology.json";
        net::save_topology(t, path.string());
        std::cout << path.string() << ": " << t.routers.size() << " routers, " << t.qchannels.size() << " qconnections, "
                  << t.sessions.size() << " sessions, digest " << to_hex(net::topology_digest(t)) << '\n';
        return 0;
    }

    part::EnergySpec energy_spec(const PartOpts& o) { return part::EnergySpec{o.w_flows, o.w_qchannels, o.w_memory}; }

    part::Partition make_partition(const PartOpts& o, const net::Topology& t, std::size_t workers)
    {
        if (o.method == "round-robin")
            return part::Partition::round_robin(t.routers.size(), workers);
        return part::anneal_best_of(t, energy_spec(o), workers, part::AnnealSchedule{o.t0, o.alpha, o.iterations}, o.seed,
                                    o.restarts);
    }

    int cmd_partition(const PartOpts& o)
    {
        const net::Topology t = net::load_topology(o.topology);
        const part::Partition p = make_partition(o, t, o.workers);
        const fs::path path = ensure_dir(o.out) / "partition.json";
        part::save_partition(p, path.string());
        const auto spec = energy_spec(o);
        std::cout << path.string() << ": energy " << part::energy(t, p, spec) << " (round-robin "
                  << part::energy(t, part::Partition::round_robin(t.routers.size(), o.workers), spec) << "), loads";
        for (auto l : p.loads())
            std::cout << ' ' << l;
        std::cout << '\n';
        return 0;
    }

    int cmd_run(const RunOpts& o)
    {
        const net::Topology t = net::load_topology(o.topology);
        const part::Partition p = partition_or_round_robin(o, t);
        par::RunConfig cfg = run_config(o, t);
        cfg.num_workers = p.num_workers;
        const par::RunResult r = par::run_simulation(t, p, cfg);
        harness::RunReport rep = harness::make_report(t, p, cfg, r);
        rep.topology_path = fs::absolute(o.topology).string();
        rep.partition_path = o.partition.empty() ? "" : fs::absolute(o.partition).string();
        const fs::path dir = ensure_dir(o.out);
        write_json(dir / "report.json", harness::to_json(rep));
        std::ofstream csv(dir / "epochs.csv");
        harness::write_epoch_csv(csv, rep.epochs);
        std::cout << "workers " << cfg.num_workers << ", lookahead " << r.lookahead << ", epochs " << r.epochs
                  << ", events " << r.events_executed << ", quantum fraction " << r.quantum_event_fraction()
                  << ", digest " << to_hex(r.digest) << '\n';
        for (const auto& s : r.sessions)
            std::cout << "  session " << s.session << ": " << s.delivered_bits << " bits"
                      << (s.end_to_end_consistent ? "" : " (INCONSISTENT)") << '\n';
        return 0;
    }

    std::vector<std::size_t> parse_counts(const std::string& s)
    {
        std::vector<std::size_t> out;
        std::size_t pos = 0;
        while (pos <= s.size())
        {
            const auto comma = s.find(',', pos);
            const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try
            {
                out.push_back(std::stoul(item));
            }
            catch (const std::exception&)
            {
                throw Error(ErrorCode::InvalidParameter, "bad worker count '" + item + "'");
            }
            if (out.back() == 0)
                throw Error(ErrorCode::InvalidParameter, "worker counts must be positive");
            if (comma == std::string::npos)
                break;
            pos = comma + 1;
        }
        return out;
    }

    int cmd_sweep(const RunOpts& ro, const PartOpts& po, const std::string& counts)
    {
        const net::Topology t = net::load_topology(ro.topology);
        par::RunConfig cfg = run_config(ro, t);
        const fs::path dir = ensure_dir(ro.out);
        auto partition_for = [&](std::size_t k) {
            part::Partition p = make_partition(po, t, k);
            part::save_partition(p, (dir / ("partition_" + std::to_string(k) + ".json")).string());
            return p;
        };
        harness::ScalingSweep sweep = harness::run_sweep(t, parse_counts(counts), partition_for, cfg);
        for (auto& run : sweep.runs)
        {
            run.topology_path = fs::absolute(ro.topology).string();
            run.partition_path = fs::absolute(dir / ("partition_" + std::to_string(run.num_workers) + ".json")).string();
            std::ofstream csv(dir / ("epochs_" + std::to_string(run.num_workers) + ".csv"));
            harness::write_epoch_csv(csv, run.epochs);
            std::cout << "workers " << run.num_workers << ": wall " << run.wall_ns / 1e6 << " ms, digest "
                      << to_hex(run.digest) << '\n';
        }
        write_json(dir / "sweep.json", harness::to_json(sweep));
        return 0;
    }

    int cmd_report(const std::string& input, const std::string& mode_name, std::uint64_t collapse, const std::string& out)
    {
        std::ifstream in(input);
        if (!in)
            throw Error(ErrorCode::InvalidParameter, "cannot open " + input);
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaViolation, e.what());
        }
        const harness::ScalingSweep sweep = harness::sweep_from_json(j);
        const harness::BreakdownMode mode = harness::parse_mode(mode_name);
        const auto rows = harness::report_breakdown(sweep, mode);
        const fs::path dir = ensure_dir(out);
        {
            std::ofstream csv(dir / ("breakdown_" + mode_name + ".csv"));
            harness::write_breakdown_csv(csv, rows, mode);
            std::ofstream txt(dir / ("breakdown_" + mode_name + ".txt"));
            harness::write_breakdown_table(txt, rows, mode);
        }
        harness::write_breakdown_table(std::cout, rows, mode);
        for (const auto& run : sweep.runs)
        {
            std::ofstream trace(dir / ("trace_" + std::to_string(run.num_workers) + ".csv"));
            harness::write_trace_csv(trace, harness::aggregate_trace(run.epochs, collapse));
        }
        std::cout << "per-event compute (ns):";
        for (const auto& [k, v] : harness::per_event_compute(sweep))
            std::cout << ' ' << k << '=' << v;
        std::cout << '\n';
        return 0;
    }

    // Stand-alone global QSM for runs started with --qsm-addr.
    int cmd_qsm_serve(const std::string& partition_path, const std::string& addr)
    {
        const part::Partition p = part::load_partition(partition_path);
        qsm::GlobalQsmService service(p.num_workers, [&p](qsm::MemoryKey k) { return p.owner(net::key_router(k)); });
        qsm::Server server(service, net_io::parse_endpoint(addr));
        std::cout << "listening on port " << server.port() << " for " << p.num_workers << " workers" << std::endl;
        server.start(p.num_workers);
        server.wait();
        std::cout << "served " << service.batches_served() << " batches, " << service.requests_applied() << " requests\n";
        return server.failed() ? 3 : 0;
    }

    void add_run_flags(CLI::App* c, RunOpts& o, bool need_partition)
    {
        c->add_option("--topology", o.topology, "topology JSON")->required()->check(CLI::ExistingFile);
        if (need_partition)
            c->add_option("--partition", o.partition, "partition JSON (default: round-robin over --workers)")
                ->check(CLI::ExistingFile);
        c->add_option("--seed", o.seed, "simulation seed (default: the topology's seed)");
        c->add_option("--stop-time", o.stop_time, "stop time in picoseconds");
        c->add_option("--qsm-transport", o.qsm_transport, "global QSM transport")
            ->check(CLI::IsMember({"inproc", "socket"}));
        c->add_option("--qsm-addr", o.qsm_addr, "external global QSM server HOST:PORT");
        c->add_option("--worker-transport", o.worker_transport, "how workers synchronize")
            ->check(CLI::IsMember({"threads", "socket", "process"}));
        c->add_option("--lookahead", o.lookahead, "override the computed lookahead (picoseconds)");
        c->add_option("--out", o.out, "output directory");
    }

    void add_part_flags(CLI::App* c, PartOpts& o)
    {
        c->add_option("--method", o.method)->check(CLI::IsMember({"anneal", "round-robin"}));
        c->add_option("--w-flows", o.w_flows, "weight of cross-worker session hops");
        c->add_option("--w-qchannels", o.w_qchannels, "weight of cross-worker quantum channels");
        c->add_option("--w-memory", o.w_memory, "weight of memory imbalance");
        c->add_option("--t0", o.t0);
        c->add_option("--alpha", o.alpha);
        c->add_option("--iterations", o.iterations);
        c->add_option("--restarts", o.restarts);
        c->add_option("--anneal-seed", o.seed);
    }
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Parallel discrete-event quantum network simulator"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* g = app.add_subcommand("gen-topology", "generate a linear or AS-like topology");
    g->add_option("--kind", gen.kind)->check(CLI::IsMember({"linear", "as"}));
    g->add_option("--routers", gen.routers, "linear: router count");
    g->add_option("--link-length", gen.link_length, "linear: link length in meters");
    g->add_option("--memories", gen.memories, "linear: memories per router");
    g->add_option("--groups", gen.groups, "as: group count");
    g->add_option("--per-group", gen.per_group, "as: routers per group");
    g->add_option("--density", gen.density, "as: session probability per group pair");
    g->add_option("--hotspot", gen.hotspot, "as: extra sessions into group 0's hub");
    g->add_option("--seed", gen.seed);
    g->add_option("--attenuation", gen.attenuation, "dB/km");
    g->add_option("--period", gen.period_ps, "photon emission period, ps");
    g->add_option("--frame-photons", gen.frame_photons);
    g->add_option("--target-bits", gen.target_bits);
    g->add_option("--max-frames", gen.max_frames);
    g->add_option("--out", gen.out, "output directory");

    PartOpts part_opts;
    auto* p = app.add_subcommand("partition", "assign routers to workers");
    p->add_option("--topology", part_opts.topology)->required()->check(CLI::ExistingFile);
    p->add_option("--workers", part_opts.workers)->required()->check(CLI::PositiveNumber);
    p->add_option("--seed", part_opts.seed, "anneal seed");
    p->add_option("--out", part_opts.out, "output directory");
    add_part_flags(p, part_opts);

    RunOpts run;
    auto* r = app.add_subcommand("run", "run one simulation");
    add_run_flags(r, run, true);
    r->add_option("--workers", run.workers, "worker count (must match --partition)");

    RunOpts sweep_run;
    PartOpts sweep_part;
    std::string counts = "1,2,4,8";
    auto* s = app.add_subcommand("sweep", "strong-scaling sweep over worker counts");
    add_run_flags(s, sweep_run, false);
    add_part_flags(s, sweep_part);
    s->add_option("--workers", counts, "comma-separated worker counts");

    std::string input, mode = "split", report_out = ".";
    std::uint64_t collapse = 8;
    auto* rep = app.add_subcommand("report", "timing breakdown and per-epoch trace from a run or sweep");
    rep->add_option("--input", input, "report.json or sweep.json")->required()->check(CLI::ExistingFile);
    rep->add_option("--mode", mode)->check(CLI::IsMember({"legacy", "split", "redefined"}));
    rep->add_option("--collapse", collapse, "epochs per trace point")->check(CLI::PositiveNumber);
    rep->add_option("--out", report_out, "output directory");

    std::string serve_partition, serve_addr = "127.0.0.1:7401";
    auto* q = app.add_subcommand("qsm-serve", "stand-alone global QSM for one run");
    q->add_option("--partition", serve_partition)->required()->check(CLI::ExistingFile);
    q->add_option("--qsm-addr", serve_addr, "listen HOST:PORT");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        // --help and friends exit 0; bad flags are config errors.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try
    {
        if (*g)
            return cmd_gen(gen);
        if (*p)
            return cmd_partition(part_opts);
        if (*r)
            return cmd_run(run);
        if (*s)
        {
            sweep_part.topology = sweep_run.topology;
            return cmd_sweep(sweep_run, sweep_part, counts);
        }
        if (*rep)
            return cmd_report(input, mode, collapse, report_out);
        if (*q)
            return cmd_qsm_serve(serve_partition, serve_addr);
    }
    catch (const Error& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        if (e.code() == ErrorCode::CausalityViolation)
            std::cerr << "the lookahead in use exceeds the smallest cross-worker channel delay; rerun without --lookahead\n";
        return exit_code_for(e.code());
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
