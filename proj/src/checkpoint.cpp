#include "routecast/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "routecast/error.hpp"
#include "routecast/io.hpp"

namespace routecast {

namespace {

using nlohmann::ordered_json;

void put_u32(std::string &out, uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
  public:
    explicit Reader(const std::string &b) : b_(b) {}
    uint32_t u32()
    {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint8_t u8()
    {
        need(1);
        return static_cast<uint8_t>(b_[pos_++]);
    }
    std::string bytes(size_t n)
    {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

  private:
    void need(size_t n) const
    {
        if (b_.size() - pos_ < n)
            throw IoError("checkpoint truncated");
    }
    const std::string &b_;
    size_t pos_ = 0;
};

struct Slot {
    std::string name;
    nn::Tensor<float> *tensor;
};

std::vector<Slot> slots(Model &m)
{
    std::vector<Slot> out;
    const auto gp = m.G.params();
    const auto dp = m.D.params();
    for (const auto &p : gp)
        out.push_back({p.name, &p.var.node()->value});
    for (const auto &b : m.G.buffers())
        out.push_back({b.name, b.tensor});
    for (const auto &p : dp)
        out.push_back({p.name, &p.var.node()->value});
    for (const auto &b : m.D.buffers())
        out.push_back({b.name, b.tensor});
    for (size_t i = 0; i < gp.size(); ++i) {
        out.push_back({"adam." + gp[i].name + ".m", &m.opt_g.m()[i]});
        out.push_back({"adam." + gp[i].name + ".v", &m.opt_g.v()[i]});
    }
    for (size_t i = 0; i < dp.size(); ++i) {
        out.push_back({"adam." + dp[i].name + ".m", &m.opt_d.m()[i]});
        out.push_back({"adam." + dp[i].name + ".v", &m.opt_d.v()[i]});
    }
    return out;
}

ordered_json gen_json(const GeneratorConfig &c)
{
    return {{"image_size", c.image_size}, {"in_channels", c.in_channels}, {"base_width", c.base_width},
            {"depth", c.depth},           {"skip", skip_mode_name(c.skip)}, {"dropout_rate", c.dropout_rate}};
}

ordered_json disc_json(const DiscriminatorConfig &c)
{
    return {{"image_size", c.image_size},
            {"in_channels", c.in_channels},
            {"n_layers", c.n_layers},
            {"base_width", c.base_width}};
}

ordered_json train_json(const TrainConfig &c)
{
    return {{"epochs", c.epochs},       {"batch", c.batch},         {"lr", c.lr},
            {"beta1", c.beta1},         {"beta2", c.beta2},         {"eps", c.eps},
            {"l1_weight", c.l1_weight}, {"connect_scale", c.connect_scale}, {"use_l1", c.use_l1},
            {"grayscale", c.grayscale}, {"seed", c.seed}};
}

GeneratorConfig gen_from(const ordered_json &j)
{
    GeneratorConfig c;
    c.image_size = j.at("image_size");
    c.in_channels = j.at("in_channels");
    c.base_width = j.at("base_width");
    c.depth = j.at("depth");
    c.skip = parse_skip_mode(j.at("skip"));
    c.dropout_rate = j.at("dropout_rate");
    return c;
}

DiscriminatorConfig disc_from(const ordered_json &j)
{
    DiscriminatorConfig c;
    c.image_size = j.at("image_size");
    c.in_channels = j.at("in_channels");
    c.n_layers = j.at("n_layers");
    c.base_width = j.at("base_width");
    return c;
}

TrainConfig train_from(const ordered_json &j)
{
    TrainConfig c;
    c.epochs = j.at("epochs");
    c.batch = j.at("batch");
    c.lr = j.at("lr");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.eps = j.at("eps");
    c.l1_weight = j.at("l1_weight");
    c.connect_scale = j.at("connect_scale");
    c.use_l1 = j.at("use_l1");
    c.grayscale = j.at("grayscale");
    c.seed = j.at("seed");
    return c;
}

} // namespace

std::string serialize_checkpoint(Model &m)
{
    std::ostringstream rng;
    rng << m.rng;
    const auto table = slots(m);
    ordered_json h;
    h["generator"] = gen_json(m.g_cfg);
    h["discriminator"] = disc_json(m.d_cfg);
    h["train"] = train_json(m.t_cfg);
    h["rng"] = rng.str();
    h["epoch"] = m.epoch;
    h["step"] = m.step;
    h["adam_t"] = {m.opt_g.t(), m.opt_d.t()};
    h["manifest_hash"] = m.manifest_hash;
    h["losses"] = {{"d_loss", m.last.d_loss},
                   {"g_adv", m.last.g_adv},
                   {"g_l1", m.last.g_l1},
                   {"p_real", m.last.p_real},
                   {"p_fake", m.last.p_fake}};
    h["tensors"] = table.size();
    const std::string header = h.dump();

    std::string out = "RCKP";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(header.size()));
    out += header;
    put_u32(out, static_cast<uint32_t>(table.size()));
    for (const auto &s : table) {
        put_u32(out, static_cast<uint32_t>(s.name.size()));
        out += s.name;
        out.push_back(0);
        put_u32(out, static_cast<uint32_t>(s.tensor->rank()));
        for (int d : s.tensor->shape())
            put_u32(out, static_cast<uint32_t>(d));
        for (float v : s.tensor->values()) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }
    return out;
}

std::unique_ptr<Model> deserialize_checkpoint(const std::string &bytes)
{
    Reader r(bytes);
    if (r.bytes(4) != "RCKP")
        throw IoError("not a checkpoint (bad magic)");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    ordered_json h;
    try {
        h = ordered_json::parse(r.bytes(r.u32()));
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    }

    std::unique_ptr<Model> m;
    try {
        m = std::make_unique<Model>(gen_from(h.at("generator")), disc_from(h.at("discriminator")),
                                    train_from(h.at("train")));
        std::istringstream rng(h.at("rng").get<std::string>());
        rng >> m->rng;
        if (!rng)
            throw IoError("corrupt checkpoint RNG state");
        m->epoch = h.at("epoch");
        m->step = h.at("step");
        m->opt_g.set_t(h.at("adam_t").at(0));
        m->opt_d.set_t(h.at("adam_t").at(1));
        m->manifest_hash = h.at("manifest_hash");
        const auto &l = h.at("losses");
        m->last = {l.at("d_loss"), l.at("g_adv"), l.at("g_l1"), l.at("p_real"), l.at("p_fake")};
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("corrupt checkpoint header: ") + e.what());
    }

    const auto table = slots(*m);
    const uint32_t count = r.u32();
    if (count != table.size())
        throw ValidationError("checkpoint holds " + std::to_string(count) + " tensors, configs imply " +
                              std::to_string(table.size()));
    for (const auto &s : table) {
        const std::string name = r.bytes(r.u32());
        if (name != s.name)
            throw ValidationError("checkpoint tensor '" + name + "' where '" + s.name + "' was expected");
        if (r.u8() != 0)
            throw IoError("checkpoint tensor '" + name + "' has an unsupported dtype");
        nn::Shape shape(r.u32());
        for (int &d : shape)
            d = static_cast<int>(r.u32());
        if (shape != s.tensor->shape())
            throw ValidationError("checkpoint tensor '" + name + "' has shape " + nn::shape_str(shape) + ", expected " +
                                  nn::shape_str(s.tensor->shape()));
        for (float &v : s.tensor->values()) {
            const uint32_t bits = r.u32();
            std::memcpy(&v, &bits, 4);
        }
    }
    if (!r.done())
        throw IoError("trailing bytes after checkpoint records");
    return m;
}

void save_checkpoint(Model &m, const std::string &path) { write_file(path, serialize_checkpoint(m)); }

std::unique_ptr<Model> load_checkpoint(const std::string &path) { return deserialize_checkpoint(read_file(path)); }

} // namespace routecast
