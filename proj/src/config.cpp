#include "texfuse/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "texfuse/errors.hpp"

namespace texfuse
{
    std::string_view to_string(TomlValue::Kind kind) noexcept
    {
        switch (kind)
        {
        case TomlValue::Kind::boolean:
            return "boolean";
        case TomlValue::Kind::integer:
            return "integer";
        case TomlValue::Kind::floating:
            return "float";
        case TomlValue::Kind::string:
            return "string";
        case TomlValue::Kind::array:
            return "array";
        }
        return "value";
    }

    namespace
    {
        class Parser
        {
        public:
            Parser(std::string_view text, std::string source) : text_(text), source_(std::move(source))
            {
            }

            TomlDocument Parse()
            {
                TomlDocument doc;
                std::string table;
                doc[table];
                while (SkipBlank(), pos_ < text_.size())
                {
                    if (Peek() == '[')
                    {
                        ++pos_;
                        SkipSpaces();
                        table = Key();
                        SkipSpaces();
                        Expect(']');
                        if (doc.count(table) && table != "")
                        {
                            Fail("table [" + table + "] defined twice");
                        }
                        doc[table];
                        EndOfLine();
                        continue;
                    }
                    const int line = line_;
                    const std::string key = Key();
                    SkipSpaces();
                    Expect('=');
                    SkipSpaces();
                    TomlValue value = Value();
                    value.line = line;
                    EndOfLine();
                    if (!doc[table].emplace(key, std::move(value)).second)
                    {
                        Fail("key '" + key + "' defined twice", line);
                    }
                }
                return doc;
            }

        private:
            [[noreturn]] void Fail(const std::string& message, int line = 0) const
            {
                throw ConfigError(source_ + ":" + std::to_string(line ? line : line_) + ": " + message);
            }

            char Peek() const
            {
                return pos_ < text_.size() ? text_[pos_] : '\0';
            }

            void Expect(char c)
            {
                if (Peek() != c)
                {
                    Fail(std::string("expected '") + c + "'");
                }
                ++pos_;
            }

            void SkipSpaces()
            {
                while (Peek() == ' ' || Peek() == '\t')
                {
                    ++pos_;
                }
            }

            void SkipComment()
            {
                if (Peek() == '#')
                {
                    while (pos_ < text_.size() && Peek() != '\n')
                    {
                        ++pos_;
                    }
                }
            }

            // Whitespace, newlines and comments.
            void SkipBlank()
            {
                while (pos_ < text_.size())
                {
                    SkipSpaces();
                    SkipComment();
                    if (Peek() == '\r' || Peek() == '\n')
                    {
                        line_ += Peek() == '\n';
                        ++pos_;
                        continue;
                    }
                    if (Peek() != ' ' && Peek() != '\t')
                    {
                        return;
                    }
                }
            }

            void EndOfLine()
            {
                SkipSpaces();
                SkipComment();
                if (Peek() == '\r')
                {
                    ++pos_;
                }
                if (pos_ < text_.size() && Peek() != '\n')
                {
                    Fail("unexpected text after value");
                }
            }

            std::string Key()
            {
                if (Peek() == '"')
                {
                    return String();
                }
                const std::size_t start = pos_;
                while (std::isalnum(static_cast<unsigned char>(Peek())) || Peek() == '_' || Peek() == '-')
                {
                    ++pos_;
                }
                if (start == pos_)
                {
                    Fail("expected a key");
                }
                if (Peek() == '.')
                {
                    Fail("dotted keys are not supported");
                }
                return std::string(text_.substr(start, pos_ - start));
            }

            std::string String()
            {
                const char quote = Peek();
                ++pos_;
                std::string out;
                while (true)
                {
                    if (pos_ >= text_.size() || Peek() == '\n')
                    {
                        Fail("unterminated string");
                    }
                    const char c = text_[pos_++];
                    if (c == quote)
                    {
                        return out;
                    }
                    if (c != '\\' || quote == '\'')
                    {
                        out += c;
                        continue;
                    }
                    const char e = text_[pos_++];
                    switch (e)
                    {
                    case 'n':
                        out += '\n';
                        break;
                    case 't':
                        out += '\t';
                        break;
                    case 'r':
                        out += '\r';
                        break;
                    case '"':
                    case '\\':
                        out += e;
                        break;
                    default:
                        Fail(std::string("unsupported escape \\") + e);
                    }
                }
            }

            TomlValue Value()
            {
                TomlValue v;
                v.line = line_;
                const char c = Peek();
                if (c == '"' || c == '\'')
                {
                    v.kind = TomlValue::Kind::string;
                    v.string = String();
                    return v;
                }
                if (c == '[')
                {
                    ++pos_;
                    v.kind = TomlValue::Kind::array;
                    while (true)
                    {
                        SkipBlank();
                        if (Peek() == ']')
                        {
                            ++pos_;
                            return v;
                        }
                        v.items.push_back(Value());
                        SkipBlank();
                        if (Peek() == ',')
                        {
                            ++pos_;
                        }
                        else if (Peek() != ']')
                        {
                            Fail("expected ',' or ']' in array");
                        }
                    }
                }
                const std::size_t start = pos_;
                while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(Peek())) && Peek() != ',' &&
                       Peek() != ']' && Peek() != '#')
                {
                    ++pos_;
                }
                std::string token(text_.substr(start, pos_ - start));
                if (token == "true" || token == "false")
                {
                    v.kind = TomlValue::Kind::boolean;
                    v.boolean = token == "true";
                    return v;
                }
                std::erase(token, '_');
                if (token.empty())
                {
                    Fail("expected a value");
                }
                const char* first = token.data() + (token[0] == '+' ? 1 : 0);
                const char* last = token.data() + token.size();
                if (token.find_first_of(".eE") == std::string::npos)
                {
                    const auto [ptr, ec] = std::from_chars(first, last, v.integer);
                    if (ec == std::errc() && ptr == last)
                    {
                        v.kind = TomlValue::Kind::integer;
                        return v;
                    }
                }
                else
                {
                    const auto [ptr, ec] = std::from_chars(first, last, v.floating);
                    if (ec == std::errc() && ptr == last && std::isfinite(v.floating))
                    {
                        v.kind = TomlValue::Kind::floating;
                        return v;
                    }
                }
                Fail("cannot parse value '" + token + "'");
            }

            std::string_view text_;
            std::string source_;
            std::size_t pos_ = 0;
            int line_ = 1;
        };

        class Reader
        {
        public:
            Reader(const std::string& source, const std::string& table, const TomlValue& value, const std::string& key)
                : source_(source), table_(table), value_(value), key_(key)
            {
            }

            [[noreturn]] void Fail(const std::string& message) const
            {
                throw ConfigError(
                    source_ + ":" + std::to_string(value_.line) + ": " + table_ + "." + key_ + ": " + message);
            }

            double Number() const
            {
                if (value_.kind == TomlValue::Kind::integer)
                {
                    return static_cast<double>(value_.integer);
                }
                if (value_.kind != TomlValue::Kind::floating)
                {
                    Fail("expected a number, got " + std::string(to_string(value_.kind)));
                }
                return value_.floating;
            }

            double Positive() const
            {
                const double v = Number();
                if (!(v > 0))
                {
                    Fail("must be positive");
                }
                return v;
            }

            std::int64_t Integer(std::int64_t min) const
            {
                if (value_.kind != TomlValue::Kind::integer)
                {
                    Fail("expected an integer, got " + std::string(to_string(value_.kind)));
                }
                if (value_.integer < min)
                {
                    Fail("must be at least " + std::to_string(min));
                }
                return value_.integer;
            }

            bool Boolean() const
            {
                if (value_.kind != TomlValue::Kind::boolean)
                {
                    Fail("expected true or false, got " + std::string(to_string(value_.kind)));
                }
                return value_.boolean;
            }

            const std::string& String() const
            {
                if (value_.kind != TomlValue::Kind::string)
                {
                    Fail("expected a string, got " + std::string(to_string(value_.kind)));
                }
                return value_.string;
            }

            std::vector<double> Numbers() const
            {
                if (value_.kind != TomlValue::Kind::array)
                {
                    Fail("expected an array, got " + std::string(to_string(value_.kind)));
                }
                std::vector<double> out;
                for (const TomlValue& item : value_.items)
                {
                    if (item.kind == TomlValue::Kind::integer)
                    {
                        out.push_back(static_cast<double>(item.integer));
                    }
                    else if (item.kind == TomlValue::Kind::floating)
                    {
                        out.push_back(item.floating);
                    }
                    else
                    {
                        Fail("array entries must be numbers");
                    }
                }
                return out;
            }

            // Runs a parse function, prefixing any ConfigError with the location.
            template <typename F>
            auto Parsed(F&& parse) const
            {
                try
                {
                    return parse(String());
                }
                catch (const ConfigError& e)
                {
                    Fail(e.what());
                }
            }

        private:
            const std::string& source_;
            const std::string& table_;
            const TomlValue& value_;
            const std::string& key_;
        };

        void ApplyPipeline(PipelineConfig& p, const std::string& key, const Reader& r)
        {
            if (key == "schedule")
                p.schedule = r.Numbers();
            else if (key == "alpha")
                p.blend.alpha = r.Number();
            else if (key == "beta")
                p.blend.beta = r.Number();
            else if (key == "boundary_radius")
                p.blend.boundary_radius = static_cast<int>(r.Integer(0));
            else if (key == "image_size")
                p.image_size = static_cast<int>(r.Integer(16));
            else if (key == "base_seed")
                p.base_seed = static_cast<std::uint64_t>(r.Integer(0));
            else if (key == "back_view_source")
                p.back_view_source = r.Parsed([](const std::string& s) { return parse_back_view_source(s); });
            else if (key == "back_view")
                p.back_view_path = r.String();
            else if (key == "guidance")
                p.guidance = r.Parsed([](const std::string& s) { return parse_guidance(s); });
            else if (key == "strict")
                p.policy = r.Boolean() ? KnownRegionPolicy::strict : KnownRegionPolicy::lenient;
            else if (key == "skip_fully_known")
                p.skip_fully_known = r.Boolean();
            else
                r.Fail("unknown key");
        }

        void ApplyInpaint(RunConfig& c, const std::string& key, const Reader& r)
        {
            if (key == "guidance_scale")
                c.pipeline.guidance_scale = r.Number();
            else if (key == "steps")
                c.pipeline.steps = static_cast<int>(r.Integer(1));
            else if (key == "negative_prompt")
                c.pipeline.negative_prompt = r.String();
            else if (key == "timeout_ms")
                c.remote.timeout_ms = static_cast<int>(r.Integer(1));
            else if (key == "retries")
                c.remote.retries = static_cast<int>(r.Integer(0));
            else
                r.Fail("unknown key");
        }

        void ApplyFusion(FuseConfig& f, const std::string& key, const Reader& r)
        {
            if (key == "iterations")
                f.iterations = static_cast<int>(r.Integer(0));
            else if (key == "lambda")
                f.lambda = r.Number();
            else if (key == "lr")
                f.adam.lr = r.Positive();
            else if (key == "beta1")
                f.adam.beta1 = r.Number();
            else if (key == "beta2")
                f.adam.beta2 = r.Number();
            else if (key == "eps")
                f.adam.eps = r.Positive();
            else if (key == "texture_resolution")
                f.resolution = static_cast<int>(r.Integer(2));
            else if (key == "proxy_levels")
                f.proxy.levels = static_cast<int>(r.Integer(1));
            else if (key == "proxy_blur")
                f.proxy.blur = r.Boolean();
            else if (key == "init")
            {
                const std::string& init = r.String();
                if (init != "bake" && init != "gray")
                {
                    r.Fail("expected \"bake\" or \"gray\"");
                }
                f.bake_init = init == "bake";
            }
            else if (key == "checkpoint_every")
                f.checkpoint_every = static_cast<int>(r.Integer(0));
            else
                r.Fail("unknown key");
        }
    } // namespace

    TomlDocument parse_toml(std::string_view text, const std::string& source)
    {
        return Parser(text, source).Parse();
    }

    RunConfig parse_run_config(std::string_view text, const std::string& source)
    {
        const TomlDocument doc = parse_toml(text, source);
        RunConfig config;
        for (const auto& [table, entries] : doc)
        {
            for (const auto& [key, value] : entries)
            {
                const Reader reader(source, table.empty() ? std::string("(top level)") : table, value, key);
                if (table == "pipeline")
                    ApplyPipeline(config.pipeline, key, reader);
                else if (table == "inpaint")
                    ApplyInpaint(config, key, reader);
                else if (table == "fusion")
                    ApplyFusion(config.fusion, key, reader);
                else
                    reader.Fail("unknown table or key");
            }
        }
        config.fusion.alpha = config.pipeline.blend.alpha;
        config.fusion.beta = config.pipeline.blend.beta;
        try
        {
            validate_config(config.pipeline);
        }
        catch (const ConfigError& e)
        {
            throw ConfigError(source + ": " + e.what());
        }
        return config;
    }

    RunConfig load_run_config(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw ConfigError("config file not found: " + path.string());
        }
        std::ostringstream text;
        text << in.rdbuf();
        return parse_run_config(text.str(), path.string());
    }

    nlohmann::json to_json(const RunConfig& c)
    {
        const PipelineConfig& p = c.pipeline;
        const FuseConfig& f = c.fusion;
        return {
            {"pipeline",
                {{"schedule", p.schedule}, {"alpha", p.blend.alpha}, {"beta", p.blend.beta},
                    {"boundary_radius", p.blend.boundary_radius}, {"image_size", p.image_size},
                    {"base_seed", p.base_seed}, {"back_view_source", std::string(to_string(p.back_view_source))},
                    {"back_view", p.back_view_path.string()}, {"guidance", std::string(to_string(p.guidance))},
                    {"strict", p.policy == KnownRegionPolicy::strict}, {"skip_fully_known", p.skip_fully_known}}},
            {"inpaint",
                {{"guidance_scale", p.guidance_scale}, {"steps", p.steps}, {"negative_prompt", p.negative_prompt},
                    {"timeout_ms", c.remote.timeout_ms}, {"retries", c.remote.retries}}},
            {"fusion",
                {{"iterations", f.iterations}, {"lambda", f.lambda}, {"lr", f.adam.lr}, {"beta1", f.adam.beta1},
                    {"beta2", f.adam.beta2}, {"eps", f.adam.eps}, {"texture_resolution", f.resolution},
                    {"proxy_levels", f.proxy.levels}, {"proxy_blur", f.proxy.blur},
                    {"init", f.bake_init ? "bake" : "gray"}, {"checkpoint_every", f.checkpoint_every}}},
        };
    }

    namespace
    {
        std::string TomlScalar(const nlohmann::json& v, const std::string& where)
        {
            if (v.is_string())
            {
                std::string out = "\"";
                for (char c : v.get<std::string>())
                {
                    if (c == '"' || c == '\\')
                        out += '\\';
                    if (c == '\n')
                    {
                        out += "\\n";
                        continue;
                    }
                    out += c;
                }
                return out + '"';
            }
            if (v.is_boolean())
            {
                return v.get<bool>() ? "true" : "false";
            }
            if (v.is_number_integer())
            {
                return v.dump();
            }
            if (v.is_number_float())
            {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
                std::string s = buf;
                if (s.find_first_of(".eE") == std::string::npos)
                {
                    s += ".0";
                }
                return s;
            }
            if (v.is_array())
            {
                std::string out = "[";
                for (std::size_t i = 0; i < v.size(); ++i)
                {
                    out += (i ? ", " : "") + TomlScalar(v[i], where);
                }
                return out + "]";
            }
            throw ConfigError(where + ": unsupported value " + v.dump());
        }
    } // namespace

    RunConfig run_config_from_json(const nlohmann::json& snapshot, const std::string& source)
    {
        if (!snapshot.is_object())
        {
            throw ConfigError(source + ": config snapshot must be an object");
        }
        std::string text;
        for (const auto& [table, entries] : snapshot.items())
        {
            if (!entries.is_object())
            {
                throw ConfigError(source + ": config table '" + table + "' must be an object");
            }
            text += "[" + table + "]\n";
            for (const auto& [key, value] : entries.items())
            {
                text += key + " = " + TomlScalar(value, source + ": " + table + "." + key) + "\n";
            }
        }
        return parse_run_config(text, source);
    }

    std::string default_config_toml()
    {
        return R"([pipeline]
schedule = [45, -45, 90, -90, 135, -135, 180]  # degrees, processed in order
alpha = 3.0              # angular falloff of the blend weights
beta = 3.0               # exponent on the distance to the visibility edge
boundary_radius = 2      # px
image_size = 512
base_seed = 0
back_view_source = "backend"  # backend | file | none
back_view = ""                # PNG used when back_view_source = "file"
guidance = "both"             # none | normal | silhouette | both
strict = true                 # reject responses that alter known pixels
skip_fully_known = true

[inpaint]
guidance_scale = 15.0
steps = 25
negative_prompt = ""
timeout_ms = 600000
retries = 2

[fusion]
iterations = 400
lambda = 10.0
lr = 0.1
beta1 = 0.9
beta2 = 0.999
eps = 1e-8
texture_resolution = 1024
proxy_levels = 4
proxy_blur = true
init = "bake"            # bake | gray
checkpoint_every = 0
)";
    }
} // namespace texfuse
