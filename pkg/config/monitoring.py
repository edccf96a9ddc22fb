"""
Request logging for the analysis API.
"""
import logging
import time

from django.utils.deprecation import MiddlewareMixin

logger = logging.getLogger(__name__)

API_PREFIX = '/api/'


class RequestResponseLogMiddleware(MiddlewareMixin):
    """
    Logs API requests and their outcome with the elapsed time.
    """
    def process_request(self, request):
        if not request.path.startswith(API_PREFIX):
            return None
        request.start_time = time.perf_counter()
        logger.info(
            "[REQUEST] %s %s | Size: %s bytes",
            request.method,
            request.get_full_path(),
            request.META.get('CONTENT_LENGTH') or 0,
        )
        return None

    def process_response(self, request, response):
        if not request.path.startswith(API_PREFIX):
            return response

        duration = 0.0
        if hasattr(request, 'start_time'):
            duration = time.perf_counter() - request.start_time

        logger.info(
            "[RESPONSE] %s %s | Status: %s | Duration: %.2fs",
            request.method,
            request.get_full_path(),
            response.status_code,
            duration,
        )
        response['X-Request-Duration'] = f"{duration:.2f}"
        return response
