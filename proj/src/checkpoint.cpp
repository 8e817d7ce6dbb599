#include "twinarm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "twinarm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace twinarm {

namespace {

constexpr char kMagic[4] = {'T', 'W', 'F', 'G'};

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void put_array(std::ostream& os, const double* d, size_t n) {
    put_u64(os, n);
    os.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(n * 8));
}

void get_array(std::istream& is, double* d, size_t n, const char* what) {
    const uint64_t stored = get_u64(is);
    if (!is || stored != n)
        throw CheckpointError(std::string("checkpoint: array '") + what + "' has " +
                              std::to_string(stored) + " values, expected " + std::to_string(n));
    is.read(reinterpret_cast<char*>(d), static_cast<std::streamsize>(n * 8));
    if (!is) throw CheckpointError(std::string("checkpoint: truncated array '") + what + "'");
}

template <typename Net, typename OnArray>
void visit_net(Net& net, OnArray&& f, const char* name) {
    auto& p = net.params();
    for (size_t l = 0; l < p.W.size(); ++l) {
        f(p.W[l].d.data(), p.W[l].d.size(), name);
        f(p.b[l].data(), p.b[l].size(), name);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const SacAgent& agent, const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    const uint8_t cid = static_cast<uint8_t>(meta.case_id);
    os.write(reinterpret_cast<const char*>(&cid), 1);
    os.write(reinterpret_cast<const char*>(meta.config_digest.data()), 32);

    auto put = [&os](const double* d, size_t n, const char*) { put_array(os, d, n); };
    visit_net(agent.policy_net(), put, "policy");
    visit_net(agent.q1_net(), put, "q1");
    visit_net(agent.q2_net(), put, "q2");
    visit_net(agent.target1_net(), put, "target1");
    visit_net(agent.target2_net(), put, "target2");
    const double la = agent.log_alpha();
    put_array(os, &la, 1);
    for (const Adam* opt : {&agent.policy_opt(), &agent.q1_opt(), &agent.q2_opt(),
                            &agent.alpha_opt()}) {
        put_array(os, opt->m().data(), opt->m().size());
        put_array(os, opt->v().data(), opt->v().size());
    }
    const SacConfig& c = agent.config();
    const double scalars[8] = {c.gamma,
                               c.tau,
                               c.target_entropy_scale * std::log(3.0),
                               static_cast<double>(agent.global_step),
                               static_cast<double>(agent.policy_opt().t()),
                               static_cast<double>(agent.q1_opt().t()),
                               static_cast<double>(agent.q2_opt().t()),
                               static_cast<double>(agent.alpha_opt().t())};
    put_array(os, scalars, 8);

    put_u64(os, meta.rng_state.size());
    os.write(meta.rng_state.data(), static_cast<std::streamsize>(meta.rng_state.size()));
    if (!os) throw CheckpointError("write failure on checkpoint: " + path);
}

namespace {

CheckpointMeta load_impl(const std::string& path, SacAgent& agent, bool nets_only) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic in " + path);
    const uint32_t ver = get_u32(is);
    if (ver != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported format version " + std::to_string(ver));
    CheckpointMeta meta;
    uint8_t cid = 0;
    is.read(reinterpret_cast<char*>(&cid), 1);
    meta.case_id = case_from_int(cid);
    is.read(reinterpret_cast<char*>(meta.config_digest.data()), 32);
    if (!is) throw CheckpointError("checkpoint: truncated header in " + path);

    auto get = [&is](double* d, size_t n, const char* what) { get_array(is, d, n, what); };
    visit_net(agent.policy_net(), get, "policy");
    visit_net(agent.q1_net(), get, "q1");
    visit_net(agent.q2_net(), get, "q2");
    visit_net(agent.target1_net(), get, "target1");
    visit_net(agent.target2_net(), get, "target2");

    double la = 0;
    get_array(is, &la, 1, "log_alpha");
    std::vector<std::vector<double>> moments(8);
    Adam* opts[4] = {&agent.policy_opt(), &agent.q1_opt(), &agent.q2_opt(), &agent.alpha_opt()};
    for (int oi = 0; oi < 4; ++oi) {
        moments[2 * oi].resize(opts[oi]->m().size());
        moments[2 * oi + 1].resize(opts[oi]->v().size());
        get_array(is, moments[2 * oi].data(), moments[2 * oi].size(), "adam.m");
        get_array(is, moments[2 * oi + 1].data(), moments[2 * oi + 1].size(), "adam.v");
    }
    double scalars[8];
    get_array(is, scalars, 8, "scalars");

    const uint64_t rlen = get_u64(is);
    if (!is || rlen > (1u << 20)) throw CheckpointError("checkpoint: bad rng-state length");
    meta.rng_state.resize(rlen);
    is.read(meta.rng_state.data(), static_cast<std::streamsize>(rlen));
    if (!is) throw CheckpointError("checkpoint: truncated rng state");
    is.peek();
    if (!is.eof()) throw CheckpointError("checkpoint: trailing data in " + path);

    if (!nets_only) {
        agent.set_log_alpha(la);
        for (int oi = 0; oi < 4; ++oi) {
            opts[oi]->m() = moments[2 * oi];
            opts[oi]->v() = moments[2 * oi + 1];
        }
        agent.global_step = static_cast<long>(scalars[3]);
        agent.policy_opt().set_t(static_cast<long>(scalars[4]));
        agent.q1_opt().set_t(static_cast<long>(scalars[5]));
        agent.q2_opt().set_t(static_cast<long>(scalars[6]));
        agent.alpha_opt().set_t(static_cast<long>(scalars[7]));
    }
    return meta;
}

}  // namespace

CheckpointMeta load_checkpoint(const std::string& path, SacAgent& agent) {
    return load_impl(path, agent, false);
}

CheckpointMeta warm_start_checkpoint(const std::string& path, SacAgent& agent) {
    return load_impl(path, agent, true);
}

}  // namespace twinarm
