#include "texfuse/errors.hpp"
#include "texfuse/inpaint.hpp"
#include "texfuse/protocol.hpp"

#include <thread>

#include <httplib.h>

namespace texfuse
{
    class RemoteBackend::Impl
    {
    public:
        Impl(std::string endpoint, int timeout_ms, int retries)
            : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms), retries_(std::max(0, retries))
        {
            const auto scheme = endpoint_.find("://");
            if (scheme == std::string::npos || endpoint_.substr(0, scheme) != "http")
            {
                throw ConfigError("remote backend endpoint must be an http:// URL, got '" + endpoint_ + "'");
            }
            const auto path = endpoint_.find('/', scheme + 3);
            host_ = endpoint_.substr(0, path);
            if (path != std::string::npos)
            {
                prefix_ = endpoint_.substr(path);
                while (!prefix_.empty() && prefix_.back() == '/')
                {
                    prefix_.pop_back();
                }
            }
        }

        nlohmann::json Call(const char* method, const std::string& route, const nlohmann::json* body)
        {
            const std::string path = prefix_ + route;
            std::string last_error;
            for (int attempt = 0; attempt <= retries_; ++attempt)
            {
                httplib::Client client(host_);
                const auto timeout = std::chrono::milliseconds(timeout_ms_);
                client.set_connection_timeout(timeout);
                client.set_read_timeout(timeout);
                client.set_write_timeout(timeout);

                httplib::Result result = body ? client.Post(path, body->dump(), "application/json") : client.Get(path);
                if (!result)
                {
                    last_error = httplib::to_string(result.error());
                    if (attempt < retries_)
                    {
                        std::this_thread::sleep_for(std::chrono::milliseconds(100 * (attempt + 1)));
                    }
                    continue;
                }
                if (result->status != 200)
                {
                    throw BackendStatusError(result->status, std::string(method) + " " + path + ": " + result->body);
                }
                try
                {
                    return nlohmann::json::parse(result->body);
                }
                catch (const nlohmann::json::exception& e)
                {
                    throw MalformedResponse(std::string(method) + " " + path + ": response is not JSON (" + e.what() + ")");
                }
            }
            throw BackendUnavailable("back-view/inpaint provider unavailable at " + endpoint_ + " after " +
                                     std::to_string(retries_ + 1) + " attempt(s): " + last_error);
        }

        const std::string& Endpoint() const
        {
            return endpoint_;
        }

    private:
        std::string endpoint_;
        std::string host_;
        std::string prefix_;
        int timeout_ms_;
        int retries_;
    };

    RemoteBackend::RemoteBackend(std::string endpoint, int timeout_ms, int retries)
        : impl_(std::make_unique<Impl>(std::move(endpoint), timeout_ms, retries))
    {
    }

    RemoteBackend::~RemoteBackend() = default;

    std::string RemoteBackend::id() const
    {
        return "remote:" + impl_->Endpoint();
    }

    ByteImage RemoteBackend::inpaint(const InpaintRequest& request)
    {
        const nlohmann::json body = protocol::to_json(request);
        return protocol::inpaint_response_from_json(impl_->Call("POST", "/inpaint", &body)).image;
    }

    ByteImage RemoteBackend::back_view(const BackViewRequest& request)
    {
        const nlohmann::json body = protocol::to_json(request);
        return protocol::backview_response_from_json(impl_->Call("POST", "/backview", &body));
    }

    std::string RemoteBackend::health()
    {
        const nlohmann::json reply = impl_->Call("GET", "/health", nullptr);
        if (!reply.is_object() || reply.value("status", "") != "ok")
        {
            throw MalformedResponse("unexpected /health reply: " + reply.dump());
        }
        return reply.value("model", "");
    }
} // namespace texfuse
