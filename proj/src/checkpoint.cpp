#include "cinp/checkpoint.hpp"

#include <map>

#include "binio.hpp"
#include "cinp/error.hpp"

namespace cinp {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'N', 'P'};
constexpr std::uint8_t kDtypeF64 = 1;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

void put_record(std::string& out, const std::string& name, const Shape& shape, std::span<const double> values) {
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    binio::put<std::uint8_t>(out, kDtypeF64);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) binio::put<std::uint64_t>(out, e);
    binio::put_f64s(out, values);
}

struct Record {
    Shape shape;
    std::vector<double> values;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out(kMagic, sizeof kMagic);
    binio::put<std::uint32_t>(out, kCheckpointVersion);
    const std::string config = config_to_json(ckpt.config).dump();
    binio::put<std::uint64_t>(out, config.size());
    out += config;
    binio::put<std::uint64_t>(out, ckpt.step);

    const auto& opt = ckpt.optimizer;
    binio::put<std::uint64_t>(out, opt.step_count);
    binio::put<double>(out, opt.beta1);
    binio::put<double>(out, opt.beta2);
    binio::put<double>(out, opt.epsilon);
    binio::put<double>(out, opt.weight_decay);

    const auto named = ckpt.params.named();
    const bool with_moments = opt.first_moment.size() == named.size() && opt.second_moment.size() == named.size();
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size() * (with_moments ? 3 : 1)));
    for (const auto& [name, t] : named) put_record(out, name, t.shape(), t.data());
    if (with_moments) {
        for (std::size_t i = 0; i < named.size(); ++i) {
            put_record(out, "adam.m/" + named[i].first, named[i].second.shape(), opt.first_moment[i]);
            put_record(out, "adam.v/" + named[i].first, named[i].second.shape(), opt.second_moment[i]);
        }
    }
    binio::put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    constexpr auto corrupt = ErrorCode::CorruptCheckpoint;
    if (bytes.size() < sizeof kMagic + 4 + 8 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
        fail(corrupt, "missing CINP magic");
    }
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    binio::Reader tail(bytes.substr(bytes.size() - 8), corrupt);
    binio::Reader r(body, corrupt);
    r.get_bytes(4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                             std::to_string(kCheckpointVersion));
    }
    if (tail.get<std::uint64_t>() != fnv1a64(body)) fail(corrupt, "checksum mismatch (truncated or damaged file)");

    Checkpoint ckpt;
    const auto config_len = r.get<std::uint64_t>();
    if (config_len > r.remaining()) fail(corrupt, "config block runs past the end of the file");
    try {
        ckpt.config = config_from_json(nlohmann::json::parse(r.get_bytes(config_len)));
    } catch (const nlohmann::json::exception& e) {
        fail(corrupt, std::string("embedded config: ") + e.what());
    }
    ckpt.step = r.get<std::uint64_t>();
    AdamState opt;
    opt.step_count = r.get<std::uint64_t>();
    opt.beta1 = r.get<double>();
    opt.beta2 = r.get<double>();
    opt.epsilon = r.get<double>();
    opt.weight_decay = r.get<double>();

    std::map<std::string, Record> records;
    const auto n_records = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_records; ++i) {
        const auto name_len = r.get<std::uint32_t>();
        std::string name = r.get_bytes(name_len);
        if (r.get<std::uint8_t>() != kDtypeF64) fail(corrupt, "unsupported dtype for " + name);
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 8) fail(corrupt, "bad rank for " + name);
        Record rec;
        std::size_t numel = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            rec.shape.push_back(r.get<std::uint64_t>());
            if (rec.shape.back() == 0 || rec.shape.back() > r.remaining()) fail(corrupt, "bad extent for " + name);
            numel *= rec.shape.back();
        }
        rec.values = r.get_f64s(numel);
        records.emplace(std::move(name), std::move(rec));
    }
    if (r.remaining() != 0) fail(corrupt, "trailing bytes after the record table");

    // Shapes are dictated by the embedded config; assign only after every
    // record has been checked.
    ModelParams params = init_params(ckpt.config.model, 0);
    const auto named = params.named();
    for (const auto& [name, t] : named) {
        auto it = records.find(name);
        if (it == records.end()) fail(corrupt, "missing tensor " + name);
        if (it->second.shape != t.shape()) {
            fail(ErrorCode::ShapeMismatch, name + " has shape " + shape_str(it->second.shape) + ", config implies " +
                                               shape_str(t.shape()));
        }
    }
    const bool with_moments = records.count("adam.m/" + named.front().first) > 0;
    for (const auto& [name, t] : named) {
        if (!with_moments) break;
        for (const char* prefix : {"adam.m/", "adam.v/"}) {
            auto it = records.find(prefix + name);
            if (it == records.end()) fail(corrupt, std::string("missing optimizer record ") + prefix + name);
            if (it->second.shape != t.shape()) fail(ErrorCode::ShapeMismatch, "optimizer record shape for " + name);
        }
    }
    for (auto& [name, t] : named) {
        Tensor leaf = t;
        leaf.set_data(records.at(name).values);
        if (with_moments) {
            opt.first_moment.push_back(records.at("adam.m/" + name).values);
            opt.second_moment.push_back(records.at("adam.v/" + name).values);
        }
    }
    ckpt.params = std::move(params);
    ckpt.optimizer = std::move(opt);
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    binio::write_file(path.string(), serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(binio::read_file(path.string()));
}

}  // namespace cinp
