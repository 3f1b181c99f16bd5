#include "texfuse/mock_server.hpp"

#include <chrono>
#include <mutex>

#include <httplib.h>

#include "texfuse/errors.hpp"
#include "texfuse/protocol.hpp"

namespace texfuse
{
    class MockServer::Impl
    {
    public:
        Impl(std::unique_ptr<InpaintBackend> backend, std::string model_name)
            : backend_(std::move(backend)), model_name_(std::move(model_name))
        {
            server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
                this->Reply(res, 200, {{"status", "ok"}, {"model", model_name_}});
            });
            server_.Post("/inpaint", [this](const httplib::Request& req, httplib::Response& res) { this->HandleInpaint(req, res); });
            server_.Post("/backview", [this](const httplib::Request& req, httplib::Response& res) { this->HandleBackView(req, res); });
        }

        httplib::Server& Server()
        {
            return server_;
        }

    private:
        void Reply(httplib::Response& res, int status, const nlohmann::json& body)
        {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        }

        void Fail(httplib::Response& res, int status, const std::string& message)
        {
            this->Reply(res, status, {{"error", message}});
        }

        template <typename Fn>
        void Guarded(httplib::Response& res, Fn&& fn)
        {
            try
            {
                fn();
            }
            catch (const SizeMismatch& e)
            {
                this->Fail(res, 422, e.what());
            }
            catch (const BackendUnavailable& e)
            {
                this->Fail(res, 503, e.what());
            }
            catch (const MalformedResponse& e)
            {
                this->Fail(res, 400, e.what());
            }
            catch (const InvalidRequest& e)
            {
                this->Fail(res, 400, e.what());
            }
            catch (const nlohmann::json::exception& e)
            {
                this->Fail(res, 400, std::string("malformed JSON: ") + e.what());
            }
            catch (const std::exception& e)
            {
                this->Fail(res, 500, e.what());
            }
        }

        void HandleInpaint(const httplib::Request& req, httplib::Response& res)
        {
            this->Guarded(res, [&] {
                const InpaintRequest request = protocol::inpaint_request_from_json(nlohmann::json::parse(req.body));
                validate_request(request);
                std::lock_guard lock(mutex_);
                // Known pixels are composited back here so every reply honors the gateway contract.
                const InpaintResponse response = inpaint(request, *backend_, KnownRegionPolicy::lenient);
                this->Reply(res, 200, protocol::to_json(response));
            });
        }

        void HandleBackView(const httplib::Request& req, httplib::Response& res)
        {
            this->Guarded(res, [&] {
                const BackViewRequest request = protocol::backview_request_from_json(nlohmann::json::parse(req.body));
                if (!request.normal_map.same_size(request.input_image) || !request.silhouette.same_size(request.input_image) ||
                    !request.depth.same_size(request.input_image))
                {
                    throw SizeMismatch("backview images differ in size");
                }
                std::lock_guard lock(mutex_);
                const ByteImage image = backend_->back_view(request);
                if (!image.same_size(request.input_image))
                {
                    throw SizeMismatch("back view size differs from the request");
                }
                this->Reply(res, 200, {{"image", protocol::encode_image(image)}});
            });
        }

        std::unique_ptr<InpaintBackend> backend_;
        std::string model_name_;
        std::mutex mutex_;
        httplib::Server server_;
    };

    MockServer::MockServer(std::unique_ptr<InpaintBackend> backend, std::string model_name)
        : impl_(std::make_unique<Impl>(std::move(backend), std::move(model_name)))
    {
    }

    MockServer::~MockServer()
    {
        this->stop();
    }

    int MockServer::bind(const std::string& host, int port)
    {
        if (port == 0)
        {
            port_ = impl_->Server().bind_to_any_port(host);
        }
        else
        {
            port_ = impl_->Server().bind_to_port(host, port) ? port : -1;
        }
        if (port_ <= 0)
        {
            throw Error("mock server cannot bind " + host + ":" + std::to_string(port));
        }
        return port_;
    }

    void MockServer::listen()
    {
        impl_->Server().listen_after_bind();
    }

    void MockServer::start()
    {
        thread_ = std::thread([this] { this->listen(); });
        impl_->Server().wait_until_ready();
    }

    void MockServer::stop()
    {
        impl_->Server().stop();
        if (thread_.joinable())
        {
            thread_.join();
        }
    }
} // namespace texfuse
