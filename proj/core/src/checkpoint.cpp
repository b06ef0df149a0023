#include "sketchedit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "config_json.hpp"
#include "sketchedit/image_io.hpp"

namespace sketchedit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'K', 'E', 'D', 'C', 'K', 'P', 'T'};

using detail::Json;

Json tensor_table(const ParamSet& p, std::uint64_t& offset) {
    Json table = Json::array();
    for (const auto& t : p) {
        table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
        offset += t.values.size();
    }
    return table;
}

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), b, b + sizeof(U));
}

template <typename U>
U get(std::span<const std::uint8_t> bytes, std::size_t at) {
    U v;
    std::memcpy(&v, bytes.data() + at, sizeof(U));
    return v;
}

ParamSet read_tensors(const Json& table, std::span<const float> payload) {
    ParamSet p;
    for (const auto& e : table) {
        const auto offset = e.at("offset").get<std::uint64_t>();
        const auto count = e.at("count").get<std::uint64_t>();
        if (offset > payload.size() || count > payload.size() - offset) {
            throw std::runtime_error("checkpoint: truncated payload for tensor '" + e.at("name").get<std::string>() + "'");
        }
        const std::size_t i = p.add(e.at("name").get<std::string>(), e.at("shape").get<std::vector<int>>());
        if (p[i].values.size() != count) throw std::runtime_error("checkpoint: tensor '" + p[i].name + "' count/shape mismatch");
        std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), count, p[i].values.begin());
    }
    return p;
}

void require_layout(const ParamSet& got, const ParamSet& want) {
    if (got.size() != want.size()) {
        throw std::runtime_error("checkpoint: " + std::to_string(got.size()) + " tensors, architecture expects " +
                                 std::to_string(want.size()));
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].name != want[i].name || got[i].shape != want[i].shape) {
            throw std::runtime_error("checkpoint: tensor " + std::to_string(i) + " ('" + got[i].name +
                                     "') does not match the architecture ('" + want[i].name + "')");
        }
    }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::uint64_t offset = 0;
    Json header;
    header["model"] = detail::to_json(ckpt.model);
    header["schedule"] = detail::to_json(ckpt.schedule);
    header["codec"] = {{"kind", "space_to_depth"}, {"factor", ckpt.model.codec_factor}};
    header["vocabulary"] = ckpt.vocabulary;
    header["train"] = detail::to_json(ckpt.train);
    header["final_step"] = ckpt.final_step;
    Json history = Json::array();
    for (const auto& r : ckpt.history) history.push_back({r.step, r.l_cldm, r.l_pix, r.total});
    header["history"] = std::move(history);
    header["tensors"] = tensor_table(ckpt.params, offset);
    header["align_tensors"] = tensor_table(ckpt.align_params, offset);
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put(out, Checkpoint::kFormatVersion);
    put(out, static_cast<std::uint64_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset * sizeof(float));
    for (const ParamSet* set : {&ckpt.params, &ckpt.align_params}) {
        for (const auto& t : *set) {
            const auto* b = reinterpret_cast<const std::uint8_t*>(t.values.data());
            out.insert(out.end(), b, b + t.values.size() * sizeof(float));
        }
    }
    return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kFixed = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < kFixed || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic (not a sketchedit checkpoint)");
    }
    const auto version = get<std::uint32_t>(bytes, sizeof(kMagic));
    if (version != Checkpoint::kFormatVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
    }
    const auto header_len = get<std::uint64_t>(bytes, sizeof(kMagic) + sizeof(std::uint32_t));
    if (header_len > bytes.size() - kFixed) throw std::runtime_error("checkpoint: truncated header");
    const auto rest = bytes.size() - kFixed - header_len;
    if (rest % sizeof(float) != 0) throw std::runtime_error("checkpoint: payload is not a whole number of floats");

    Checkpoint c;
    try {
        const Json h = Json::parse(bytes.begin() + kFixed, bytes.begin() + static_cast<std::ptrdiff_t>(kFixed + header_len));
        std::vector<float> payload(rest / sizeof(float));
        std::memcpy(payload.data(), bytes.data() + kFixed + header_len, rest);

        c.model = detail::model_from_json(h.at("model"));
        c.schedule = detail::schedule_from_json(h.at("schedule"));
        c.vocabulary = h.at("vocabulary").get<std::vector<std::string>>();
        c.train = detail::train_from_json(h.at("train"));
        c.train.model.vocab_size = c.model.vocab_size;
        c.final_step = h.at("final_step").get<int>();
        for (const auto& r : h.at("history")) {
            c.history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
        }
        c.params = read_tensors(h.at("tensors"), payload);
        c.align_params = read_tensors(h.at("align_tensors"), payload);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: malformed header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("checkpoint: invalid configuration: ") + e.what());
    }
    if (c.model.vocab_size != c.vocab().size()) throw std::runtime_error("checkpoint: vocabulary size mismatch");
    require_layout(c.params, Denoiser(c.model).layout());
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return deserialize_checkpoint(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Checkpoint initial_checkpoint(const ModelConfig& model, const ScheduleConfig& schedule, const Vocabulary& vocab,
                              const TrainConfig& train) {
    Checkpoint c;
    c.model = model;
    c.model.vocab_size = vocab.size();
    c.schedule = schedule;
    c.vocabulary.assign(vocab.tokens().begin() + 1, vocab.tokens().end());
    c.train = train;
    c.train.model = c.model;
    c.train.schedule = schedule;
    make_schedule(schedule);
    c.params = Denoiser(c.model).init_params(train.seed);
    return c;
}

}  // namespace sketchedit
