#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crane/binio.hpp"
#include "crane/hash.hpp"
#include "crane/trainer.hpp"

namespace crane {

namespace {
constexpr char kMagic[8] = {'C', 'R', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string to_hex(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

void Trainer::save_checkpoint(const std::string& path) const {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open checkpoint for writing: " + tmp);

        os.write(kMagic, sizeof(kMagic));
        binio::write_u32(os, kVersion);
        binio::write_u8(os, static_cast<std::uint8_t>(cfg_.distribution_kind));
        binio::write_u8(os, cfg_.rpo_enabled ? 1 : 0);
        binio::write_u32(os, static_cast<std::uint32_t>(cfg_.n_envs));
        binio::write_u32(os, static_cast<std::uint32_t>(cfg_.rollout_len));
        binio::write_u32(os, static_cast<std::uint32_t>(env_cfg_.action_repeat));
        binio::write_u64(os, static_cast<std::uint64_t>(update_index_));
        binio::write_u64(os, sim_steps_);
        binio::write_u64(os, transitions_);
        binio::write_u64(os, digest_);
        binio::write_u32(os, static_cast<std::uint32_t>(consecutive_nonfinite_));

        net_.serialize(os);
        opt_.serialize(os);
        binio::write_string(os, shuffle_rng_.serialize_string());

        for (int i = 0; i < cfg_.n_envs; ++i) {
            envs_[static_cast<std::size_t>(i)].serialize(os);
            binio::write_string(os, action_rngs_[static_cast<std::size_t>(i)].serialize_string());
            for (int c = 0; c < kObsDim; ++c) binio::write_f64(os, pending_obs_(i, c));
            binio::write_f64(os, ep_return_[static_cast<std::size_t>(i)]);
            binio::write_u64(os, ep_len_[static_cast<std::size_t>(i)]);
        }
        os.flush();
        if (!os) throw IoError("failed writing checkpoint: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot finalize checkpoint " + path + ": " + ec.message());
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ProtocolError("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = binio::read_u32(is);
    if (version != kVersion) throw ProtocolError("checkpoint: unsupported version");

    const auto kind = static_cast<DistributionKind>(binio::read_u8(is));
    const bool rpo = binio::read_u8(is) != 0;
    const auto n_envs = static_cast<int>(binio::read_u32(is));
    const auto rollout_len = static_cast<int>(binio::read_u32(is));
    const auto action_repeat = static_cast<int>(binio::read_u32(is));
    if (kind != cfg_.distribution_kind || rpo != cfg_.rpo_enabled || n_envs != cfg_.n_envs ||
        rollout_len != cfg_.rollout_len || action_repeat != env_cfg_.action_repeat) {
        throw ProtocolError("checkpoint: run configuration mismatch with " + path);
    }

    update_index_ = static_cast<int>(binio::read_u64(is));
    sim_steps_ = binio::read_u64(is);
    transitions_ = binio::read_u64(is);
    digest_ = binio::read_u64(is);
    consecutive_nonfinite_ = static_cast<int>(binio::read_u32(is));

    net_.deserialize(is);
    opt_.deserialize(is);
    shuffle_rng_.deserialize_string(binio::read_string(is));

    for (int i = 0; i < cfg_.n_envs; ++i) {
        envs_[static_cast<std::size_t>(i)].deserialize(is);
        action_rngs_[static_cast<std::size_t>(i)].deserialize_string(binio::read_string(is));
        for (int c = 0; c < kObsDim; ++c) pending_obs_(i, c) = binio::read_f64(is);
        ep_return_[static_cast<std::size_t>(i)] = binio::read_f64(is);
        ep_len_[static_cast<std::size_t>(i)] = binio::read_u64(is);
    }
    if (!is) throw IoError("truncated checkpoint: " + path);
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    CheckpointInfo info;
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ProtocolError("checkpoint: bad magic in " + path);
    }
    info.version = binio::read_u32(is);
    if (info.version != kVersion) throw ProtocolError("checkpoint: unsupported version");
    info.kind = static_cast<DistributionKind>(binio::read_u8(is));
    info.rpo_enabled = binio::read_u8(is) != 0;
    info.n_envs = static_cast<int>(binio::read_u32(is));
    info.rollout_len = static_cast<int>(binio::read_u32(is));
    info.action_repeat = static_cast<int>(binio::read_u32(is));
    info.update_index = binio::read_u64(is);
    info.sim_steps = binio::read_u64(is);
    info.transitions = binio::read_u64(is);
    binio::read_u64(is);  // digest
    binio::read_u32(is);  // nonfinite counter
    info.topology.obs_dim = static_cast<int>(binio::read_u32(is));
    info.topology.hidden_size = static_cast<int>(binio::read_u32(is));
    info.topology.hidden_depth = static_cast<int>(binio::read_u32(is));
    info.topology.actor_dim = static_cast<int>(binio::read_u32(is));
    info.topology.log_sigma_dim = static_cast<int>(binio::read_u32(is));

    std::ifstream whole(path, std::ios::binary);
    std::ostringstream buf;
    buf << whole.rdbuf();
    info.content_hash = to_hex(fnv1a64(buf.str()));
    return info;
}

}  // namespace crane
