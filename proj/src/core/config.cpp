#include "wss/core/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "wss/core/image_io.hpp"

namespace wss {

void CrfSettings::validate() const {
    if (iterations < 0) throw std::invalid_argument("crf iterations must be >= 0");
    if (gaussian_weight < 0 || bilateral_weight < 0) throw std::invalid_argument("crf weights must be >= 0");
    if (gaussian_sigma_xy < 0 || bilateral_sigma_xy < 0 || bilateral_sigma_rgb < 0)
        throw std::invalid_argument("crf sigmas must be >= 0");
    if (gaussian_weight > 0 && gaussian_sigma_xy <= 0)
        throw std::invalid_argument("crf gaussian_sigma_xy must be > 0 when gaussian_weight > 0");
    if (bilateral_weight > 0 && (bilateral_sigma_xy <= 0 || bilateral_sigma_rgb <= 0))
        throw std::invalid_argument("crf bilateral sigmas must be > 0 when bilateral_weight > 0");
}

void PipelineConfig::validate() const {
    if (!(lambda_balance >= 0)) throw std::invalid_argument("lambda_balance must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (crop_size < 8) throw std::invalid_argument("crop_size must be >= 8");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("momentum must be in [0, 1)");
    if (stage1_iters < 0 || stage2_iters < 0) throw std::invalid_argument("iteration counts must be >= 0");
    if (!(lr_drop_factor >= 1)) throw std::invalid_argument("lr_drop_factor must be >= 1");
    if (!(lr_drop_at > 0 && lr_drop_at <= 1)) throw std::invalid_argument("lr_drop_at must be in (0, 1]");
    if (inference_scales.empty()) throw std::invalid_argument("inference_scales must not be empty");
    for (double s : inference_scales)
        if (!(s > 0)) throw std::invalid_argument("inference scales must be > 0");
    if (!(fg_min >= 0 && fg_min < fg_max && fg_max <= 1))
        throw std::invalid_argument("foreground bounds must satisfy 0 <= fg_min < fg_max <= 1");
    if (retrieved_max_dim < 1 || target_max_dim < 1) throw std::invalid_argument("max dims must be >= 1");
    if (backbone != "toy" && backbone != "dilated-resnet-contract")
        throw std::invalid_argument("unknown backbone \"" + backbone + "\"");
    if (branch_head_convs < 0) throw std::invalid_argument("branch_head_convs must be >= 0");
    if (mask_source != "oracle" && mask_source != "consensus")
        throw std::invalid_argument("mask_source must be oracle or consensus");
    if (max_per_class < 1) throw std::invalid_argument("max_per_class must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
    crf.validate();
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    if (value.empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <typename T>
T parse_number(const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) throw std::invalid_argument("bad number \"" + text + "\"");
    return value;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "on" || text == "1") return true;
    if (text == "false" || text == "off" || text == "0") return false;
    throw std::invalid_argument("bad boolean \"" + text + "\"");
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Field {
    const char* key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <typename M>
Field field(const char* key, M PipelineConfig::*member) {
    using T = std::remove_cvref_t<decltype(std::declval<PipelineConfig>().*member)>;
    Field f{key, {}, {}};
    if constexpr (std::is_same_v<T, bool>) {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.*member = parse_bool(v); };
        f.get = [member](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); };
    } else if constexpr (std::is_same_v<T, double>) {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.*member = parse_number<double>(v); };
        f.get = [member](const PipelineConfig& c) { return format_double(c.*member); };
    } else if constexpr (std::is_integral_v<T>) {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.*member = parse_number<T>(v); };
        f.get = [member](const PipelineConfig& c) { return std::to_string(c.*member); };
    } else if constexpr (std::is_same_v<T, std::string>) {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.*member = v; };
        f.get = [member](const PipelineConfig& c) { return c.*member; };
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        f.set = [member](PipelineConfig& c, const std::string& v) {
            std::vector<double> values;
            for (const auto& item : split_list(v)) values.push_back(parse_number<double>(item));
            c.*member = std::move(values);
        };
        f.get = [member](const PipelineConfig& c) {
            std::string out;
            for (double d : c.*member) out += (out.empty() ? "" : ",") + format_double(d);
            return out;
        };
    } else {
        static_assert(std::is_same_v<T, std::vector<std::string>>);
        f.set = [member](PipelineConfig& c, const std::string& v) { c.*member = split_list(v); };
        f.get = [member](const PipelineConfig& c) {
            std::string out;
            for (const auto& s : c.*member) out += (out.empty() ? "" : ",") + s;
            return out;
        };
    }
    return f;
}

template <typename M>
Field crf_field(const char* key, M CrfSettings::*member) {
    Field f{key, {}, {}};
    if constexpr (std::is_same_v<M, int>) {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.crf.*member = parse_number<int>(v); };
        f.get = [member](const PipelineConfig& c) { return std::to_string(c.crf.*member); };
    } else {
        f.set = [member](PipelineConfig& c, const std::string& v) { c.crf.*member = parse_number<double>(v); };
        f.get = [member](const PipelineConfig& c) { return format_double(c.crf.*member); };
    }
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field("lambda_balance", &PipelineConfig::lambda_balance),
        field("batch_size", &PipelineConfig::batch_size),
        field("crop_size", &PipelineConfig::crop_size),
        field("learning_rate", &PipelineConfig::learning_rate),
        field("weight_decay", &PipelineConfig::weight_decay),
        field("momentum", &PipelineConfig::momentum),
        field("stage1_iters", &PipelineConfig::stage1_iters),
        field("stage2_iters", &PipelineConfig::stage2_iters),
        field("lr_drop_factor", &PipelineConfig::lr_drop_factor),
        field("lr_drop_at", &PipelineConfig::lr_drop_at),
        field("hflip", &PipelineConfig::hflip),
        field("detach_branch", &PipelineConfig::detach_branch),
        field("checkpoint_every", &PipelineConfig::checkpoint_every),
        field("inference_scales", &PipelineConfig::inference_scales),
        field("crf_on_generation", &PipelineConfig::crf_on_generation),
        field("crf_on_final", &PipelineConfig::crf_on_final),
        crf_field("crf_iterations", &CrfSettings::iterations),
        crf_field("crf_gaussian_weight", &CrfSettings::gaussian_weight),
        crf_field("crf_gaussian_sigma_xy", &CrfSettings::gaussian_sigma_xy),
        crf_field("crf_bilateral_weight", &CrfSettings::bilateral_weight),
        crf_field("crf_bilateral_sigma_xy", &CrfSettings::bilateral_sigma_xy),
        crf_field("crf_bilateral_sigma_rgb", &CrfSettings::bilateral_sigma_rgb),
        field("fg_min", &PipelineConfig::fg_min),
        field("fg_max", &PipelineConfig::fg_max),
        field("retrieved_max_dim", &PipelineConfig::retrieved_max_dim),
        field("target_max_dim", &PipelineConfig::target_max_dim),
        field("backbone", &PipelineConfig::backbone),
        field("branch_head_convs", &PipelineConfig::branch_head_convs),
        field("classes", &PipelineConfig::classes),
        field("retrieved_dir", &PipelineConfig::retrieved_dir),
        field("target_manifest", &PipelineConfig::target_manifest),
        field("eval_manifest", &PipelineConfig::eval_manifest),
        field("mask_source", &PipelineConfig::mask_source),
        field("max_per_class", &PipelineConfig::max_per_class),
        field("seed", &PipelineConfig::seed),
        field("workers", &PipelineConfig::workers),
    };
    return table;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
        if (it == table.end())
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
        try {
            it->set(config, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
        }
    }
    config.validate();
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string format_config(const PipelineConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

}  // namespace wss
