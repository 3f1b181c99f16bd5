#include <cmath>
#include <string>

#include "texfuse/camera.hpp"
#include "texfuse/errors.hpp"
#include "texfuse/inpaint.hpp"

namespace texfuse
{
    GuidanceMode parse_guidance(std::string_view name)
    {
        if (name == "none")
        {
            return GuidanceMode::none;
        }
        if (name == "normal")
        {
            return GuidanceMode::normal;
        }
        if (name == "silhouette")
        {
            return GuidanceMode::silhouette;
        }
        if (name == "both")
        {
            return GuidanceMode::both;
        }
        throw ConfigError("unknown guidance mode '" + std::string(name) + "' (expected none, normal, silhouette or both)");
    }

    std::string_view to_string(GuidanceMode mode) noexcept
    {
        switch (mode)
        {
        case GuidanceMode::none:
            return "none";
        case GuidanceMode::normal:
            return "normal";
        case GuidanceMode::silhouette:
            return "silhouette";
        case GuidanceMode::both:
            return "both";
        }
        return "both";
    }

    namespace
    {
        const char* ViewLabel(double azimuth)
        {
            const double grid = normalize_azimuth(45.0 * std::round(normalize_azimuth(azimuth) / 45.0));
            const long step = std::lround(grid / 45.0);
            switch (step)
            {
            case 0:
                return "front";
            case 1:
                return "left";
            case -1:
                return "right";
            case 2:
            case -2:
                return "side";
            default:
                return "back";
            }
        }
    } // namespace

    std::string view_prompt(double azimuth, PromptStyle style)
    {
        if (style == PromptStyle::back_init)
        {
            return "back view of a person wearing nice clothes in front of a solid gray background, best quality";
        }
        return std::string("a person wearing nice clothes in front of a solid white background, ") + ViewLabel(azimuth) +
               " view, best quality, extremely detailed";
    }
} // namespace texfuse
