import logging

from drf_spectacular.utils import OpenApiResponse, extend_schema
from rest_framework import permissions, status
from rest_framework.response import Response
from rest_framework.views import APIView

from apps.core.exceptions import InterimAnalysisError

from .serializers import AnalyzeRequestSerializer, AnalyzeResponseSerializer
from .services import InterimAnalysisService, resolve_options
from .streamfile import parse_rows

logger = logging.getLogger(__name__)


class AnalyzeAPIView(APIView):
    """
    Interim analysis of posted stream rows.
    Returns the same per-experiment table as `manage.py analyze --format json`.
    """
    permission_classes = [permissions.AllowAny]

    @extend_schema(
        request=AnalyzeRequestSerializer,
        responses={
            200: AnalyzeResponseSerializer,
            400: OpenApiResponse(description="Bad Request"),
            500: OpenApiResponse(description="Internal Server Error")
        },
        summary="Evaluate decision rules at the interim day",
        description="Validate stream rows, evaluate the selected rules on each experiment's interim prefix "
                    "and return one decision per experiment and rule."
    )
    def post(self, request, version=None):
        serializer = AnalyzeRequestSerializer(data=request.data)
        if not serializer.is_valid():
            return Response(serializer.errors, status=status.HTTP_400_BAD_REQUEST)

        payload = dict(serializer.validated_data)
        rows = payload.pop('rows')
        try:
            options = resolve_options(payload)
            streams = parse_rows(rows)
            report = InterimAnalysisService().evaluate_streams(streams, options)
        except InterimAnalysisError as exc:
            return Response({'error': str(exc)}, status=status.HTTP_400_BAD_REQUEST)
        except Exception:
            logger.exception("[ANALYZE] request failed")
            return Response({'error': 'internal error'}, status=status.HTTP_500_INTERNAL_SERVER_ERROR)

        response = AnalyzeResponseSerializer({
            'decisions': report.decisions,
            'skipped': report.skipped,
            'config': report.config,
        })
        return Response(response.data)
