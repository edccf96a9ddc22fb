"""
URL configuration for the interim analysis API.
"""
from django.urls import include, path
from drf_spectacular.views import SpectacularAPIView

urlpatterns = [
    # API routes (URLPathVersioning)
    path('api/<str:version>/', include('apps.experiments.urls')),

    # API schema
    path('api/schema/', SpectacularAPIView.as_view(), name='schema'),
]
