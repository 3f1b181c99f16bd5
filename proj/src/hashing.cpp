#include "texfuse/hashing.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include <openssl/evp.h>

#include "texfuse/errors.hpp"

namespace texfuse
{
    namespace
    {
        std::string Hex(const unsigned char* data, unsigned int size)
        {
            static constexpr char Digits[] = "0123456789abcdef";
            std::string out;
            for (unsigned int i = 0; i < size; ++i)
            {
                out += Digits[data[i] >> 4];
                out += Digits[data[i] & 15];
            }
            return out;
        }

        std::string ReadFile(const std::filesystem::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw Error("cannot read " + path.string());
            }
            std::ostringstream text;
            text << in.rdbuf();
            return text.str();
        }

        std::string CanonicalJsonLines(const std::string& text)
        {
            std::string out;
            std::istringstream lines(text);
            std::string line;
            while (std::getline(lines, line))
            {
                if (!line.empty())
                {
                    out += strip_timings(nlohmann::json::parse(line)).dump() + '\n';
                }
            }
            return out;
        }
    } // namespace

    std::string sha256_hex(std::string_view bytes)
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int size = 0;
        if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &size, EVP_sha256(), nullptr) != 1)
        {
            throw Error("SHA-256 digest failed");
        }
        return Hex(digest.data(), size);
    }

    std::string sha256_file(const std::filesystem::path& path)
    {
        return sha256_hex(ReadFile(path));
    }

    nlohmann::json strip_timings(const nlohmann::json& value)
    {
        if (value.is_object())
        {
            nlohmann::json out = nlohmann::json::object();
            for (const auto& [key, item] : value.items())
            {
                if (key != "elapsed_ms" && key != "timings" && key != "started_at")
                {
                    out[key] = strip_timings(item);
                }
            }
            return out;
        }
        if (value.is_array())
        {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& item : value)
            {
                out.push_back(strip_timings(item));
            }
            return out;
        }
        return value;
    }

    std::string hash_directory(const std::filesystem::path& dir)
    {
        if (!std::filesystem::is_directory(dir))
        {
            throw Error("not a directory: " + dir.string());
        }
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        {
            if (entry.is_regular_file())
            {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        std::string listing;
        for (const auto& file : files)
        {
            std::string content = ReadFile(file);
            const auto ext = file.extension();
            if (ext == ".json")
            {
                content = strip_timings(nlohmann::json::parse(content)).dump();
            }
            else if (ext == ".jsonl")
            {
                content = CanonicalJsonLines(content);
            }
            listing += std::filesystem::relative(file, dir).generic_string() + ' ' + sha256_hex(content) + '\n';
        }
        return sha256_hex(listing);
    }
} // namespace texfuse
